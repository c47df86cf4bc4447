use serde::{Deserialize, Serialize};

use super::scenario::{DescentScenario, ScvxParams};
use super::scvx::{scvx_solve, scvx_solve_from, ScvxOutcome, ScvxStatus};
use super::GuidanceError;
use crate::model::{EnvironmentSpec, VehicleSpec};

/// One tilt limit of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub theta_max_deg: f64,
    pub status: ScvxStatus,
    pub iterations: usize,
    pub final_time_s: f64,
    pub final_mass_kg: f64,
    pub propellant_kg: f64,
    pub virtual_control: f64,
    /// Whether the kept plan was solved from the previous converged plan.
    pub warm_started: bool,
}

fn propellant(out: &ScvxOutcome) -> f64 {
    let t = &out.trajectory;
    t.mass(0) - t.mass(t.nodes() - 1)
}

/// Solve the scenario at each tilt limit in ascending order.
///
/// A plan feasible at one tilt limit is feasible at every larger one, so each
/// point is also solved from the last converged plan. Accepted SCvx steps
/// never raise the merit function, so that candidate keeps propellant
/// non-increasing; the cold solve is kept when it finds a cheaper optimum.
pub fn tilt_sweep(
    scenario: &DescentScenario,
    thetas_deg: &[f64],
    vehicle: &VehicleSpec,
    env: &EnvironmentSpec,
    params: &ScvxParams,
) -> Result<Vec<(SweepPoint, ScvxOutcome)>, GuidanceError> {
    let mut thetas = thetas_deg.to_vec();
    thetas.sort_by(f64::total_cmp);
    thetas.dedup();
    let mut points = Vec::with_capacity(thetas.len());
    let mut previous: Option<ScvxOutcome> = None;
    for theta in thetas {
        let sc = DescentScenario {
            theta_max: theta,
            ..scenario.clone()
        };
        sc.validate(vehicle)?;
        let cold = scvx_solve(&sc, vehicle, env, params)?;
        let warm = match &previous {
            Some(prev) => Some(scvx_solve_from(
                &sc,
                vehicle,
                env,
                params,
                &prev.trajectory,
            )?),
            None => None,
        };
        let (out, warm_started) = match warm {
            Some(w)
                if w.report.converged()
                    && (!cold.report.converged() || propellant(&w) < propellant(&cold)) =>
            {
                (w, true)
            }
            _ => (cold, false),
        };
        let point = SweepPoint {
            theta_max_deg: theta,
            status: out.report.status,
            iterations: out.report.iterations,
            final_time_s: out.trajectory.final_time,
            final_mass_kg: out.trajectory.mass(out.trajectory.nodes() - 1),
            propellant_kg: propellant(&out),
            virtual_control: out.report.virtual_control,
            warm_started,
        };
        if out.report.converged() {
            previous = Some(out.clone());
        }
        points.push((point, out));
    }
    Ok(points)
}
