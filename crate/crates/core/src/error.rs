use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A numeric argument is out of its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The target motion is unphysical at the requested time (no positive
    /// delay root, or speed not below the propagation speed).
    #[error("unphysical kinematics: {0}")]
    Kinematics(String),

    #[error("waveform construction failed: {0}")]
    Construction(String),

    #[error("echo synthesis failed: {0}")]
    Synthesis(String),

    #[error("degenerate scene: {0}")]
    DegenerateScene(String),
}

impl Error {
    /// Short machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parameter(_) => "parameter",
            Error::Kinematics(_) => "kinematics",
            Error::Construction(_) => "construction",
            Error::Synthesis(_) => "synthesis",
            Error::DegenerateScene(_) => "degenerate_scene",
        }
    }
}
