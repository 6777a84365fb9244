//! Simulation and compression of pulse-Doppler radar echoes from targets
//! with quadratic radial motion.
//!
//! The crate is split along the processing chain:
//!
//! * [`waveform`] builds baseband pulses (LFM, Costas, imported samples) and
//!   their upsampled spectra.
//! * [`motion`] holds the kinematic model: the exact implicit two-way delay,
//!   its per-pulse "cruise-and-go" linearization and the error bounds of that
//!   linearization.
//! * [`synth`] synthesizes per-pulse receive records from the exact model.
//! * [`classic`] is the stop-and-go baseline (range compression followed by
//!   a slow-time transform).
//! * [`cago`] is the frequency-remapped range-Doppler-acceleration
//!   compressor with coherent integration over pulses.
//! * [`oracle`] contains brute-force time-domain correlators.
//! * [`metrics`] extracts peaks, losses and ambiguity levels.

// Negated comparisons deliberately reject NaN inputs.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cago;
pub mod classic;
mod error;
pub(crate) mod fft;
pub mod metrics;
pub mod motion;
pub mod oracle;
pub mod synth;
pub mod waveform;

pub use error::{Error, Result};
pub use rustfft::num_complex::Complex64;

pub use cago::{
    rda_estimate, rda_integrate, rda_map, rda_pulse, DelayAxis, Hypothesis, HypothesisGrid,
    PeakReport, RdaMap, RdaOptions, RdaProcessor,
};
pub use classic::{classic_estimate, doppler_process, range_compress, RangeProfiles, RdMap};
pub use motion::{
    acceleration_ratio, cago_delay, epsilon_bounds, exact_delay, predicted_loss,
    pulse_kinematics, range_at, EpsilonBounds, PulseKinematics, RadarParams, TargetTruth,
};
pub use metrics::{
    correlation_loss, correlation_loss_with, extract_peak, extract_rd_peak, sidelobe_levels,
    speedup_estimate, SidelobeLevels,
};
pub use synth::{add_noise, synthesize_echo, EchoCube, ReceiveWindow};
pub use waveform::{Waveform, WaveformKind, SpectrumTable};
