//! 3-DoF truth model with engine non-idealities, Monte Carlo dispersions
//! and rare failure modes.

mod failure;
mod flight;
mod perturb;
mod truth;

pub use failure::{sample_failures, FailureEvent, FailureMode, FailureModel};
pub use flight::{
    run_open_loop, FlightRecord, FlightSample, FlightSim, RunSetup, Touchdown,
    FLIGHT_EXTRA_COLUMNS, SIM_DT,
};
pub use perturb::{PerturbationDraw, PerturbationScales, StepNoise};
pub use truth::{
    dead_zone_law, engine_output, rk4_step, tilt_direction, Actuation, Slosh, TruthState,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation configuration: {0}")]
    Config(String),
    #[error("simulation fault at t = {t:.3} s: {reason}")]
    Fault { t: f64, reason: String },
    #[error("no touchdown before t = {t:.3} s")]
    Timeout { t: f64 },
}
