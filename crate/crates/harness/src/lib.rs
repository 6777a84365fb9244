//! Scenario presets, experiment runners and file formats for the `rda`
//! command-line tool.

pub mod experiments;
pub mod formats;
pub mod scenario;

pub use experiments::{run_bench, run_loss_sweep, run_map, run_synth, MapRequest, Method, Setup};
pub use scenario::Scenario;
