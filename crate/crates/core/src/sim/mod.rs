//! Scenario loading, the simulation loop and trace output.

mod run;
mod scenario;
mod trace;

pub use run::{
    deviation_from, replay, resolve_sigma, run, simulate, simulate_with_sigma, stage_command,
    summarize, Deviation, SegmentDeviation,
};
pub use scenario::{
    ModelError, NoiseLevel, Scenario, DEFAULT_BODY_KD, DEFAULT_BODY_KP, DEFAULT_EE_KD,
    DEFAULT_EE_KP,
};
pub use trace::{response_time, write_csv, Record, Summary, Trace};
