//! Successive convexification for minimum-fuel powered descent.
//!
//! The nonconvex problem is posed in log-mass form (`u = T/m`, `z = ln m`)
//! with normalised time and a free final time. Each iteration linearises the
//! dynamics about the current reference, solves a second-order cone
//! subproblem with virtual control and a trust region, and accepts or
//! rejects the step on the ratio of actual to predicted cost reduction.

mod check;
mod discretize;
mod scenario;
mod scvx;
mod subproblem;
mod sweep;
mod trajectory;

pub use check::{check_solution, ConstraintReport};
pub use discretize::{
    linearize_discretize, linearize_interval, linearize_scaled, propagate_interval, Discretization,
    IntervalModel, Mat7, Mat74, Plant,
};
pub use scenario::{DescentScenario, Hold, Scaling, ScvxParams};
pub use scvx::{
    initial_guess, scvx_solve, scvx_solve_from, IterationRecord, ScvxOutcome, ScvxReport,
    ScvxStatus,
};
pub use subproblem::{Layout, Subproblem, SubproblemSolution, TrustRegion};
pub use sweep::{tilt_sweep, SweepPoint};
pub use trajectory::{fmt_sig, Control, ScaledTrajectory, State, Trajectory, TRAJECTORY_COLUMNS};

use thiserror::Error;

use crate::conic::ConicError;
use crate::model::{EnvironmentSpec, ModelError, VehicleSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GuidanceError {
    #[error("invalid guidance configuration: {0}")]
    Config(String),
    #[error("linearization failed: {0}")]
    Linearization(String),
    #[error("trajectory file: {0}")]
    Io(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Conic(#[from] ConicError),
}

/// Build the convex subproblem about `reference` with the given trust radii
/// (scaled units).
pub fn build_subproblem(
    reference: &Trajectory,
    scenario: &DescentScenario,
    vehicle: &VehicleSpec,
    env: &EnvironmentSpec,
    params: &ScvxParams,
    trust: TrustRegion,
) -> Result<Subproblem, GuidanceError> {
    scenario.validate(vehicle)?;
    let scaling = Scaling::new(scenario, vehicle, env);
    let plant = Plant::new(&scaling, env);
    let scaled = reference.to_scaled(&scaling);
    let discretization = linearize_scaled(&scaled, &plant, params.hold, params.substeps)?;
    subproblem::build(&subproblem::SubproblemInputs {
        scenario,
        vehicle,
        params,
        scaling: &scaling,
        reference: &scaled,
        discretization: &discretization,
        trust,
    })
}
