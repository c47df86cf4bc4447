use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::check::check_solution;
use super::discretize::{linearize_scaled, propagate_interval, Plant};
use super::scenario::{DescentScenario, Hold, Scaling, ScvxParams};
use super::subproblem::{build, min_thrust_node, SubproblemInputs, TrustRegion};
use super::trajectory::{ScaledTrajectory, Trajectory};
use super::GuidanceError;
use crate::conic::{ClarabelBackend, ConicSolver, ConicStatus};
use crate::model::{EnvironmentSpec, VehicleSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScvxStatus {
    Converged,
    NotConverged,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub subproblem_status: ConicStatus,
    pub accepted: bool,
    pub virtual_control: f64,
    pub state_deviation: f64,
    pub final_time_s: f64,
    pub final_mass_kg: f64,
    pub ratio: f64,
    pub trust_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScvxReport {
    pub status: ScvxStatus,
    pub iterations: usize,
    /// Virtual-control norm of the returned iterate.
    pub virtual_control: f64,
    /// Largest node position defect after RK4 re-propagation, m.
    pub nonlinear_defect_m: f64,
    pub history: Vec<IterationRecord>,
}

impl ScvxReport {
    pub fn converged(&self) -> bool {
        self.status == ScvxStatus::Converged
    }
}

#[derive(Debug, Clone)]
pub struct ScvxOutcome {
    pub trajectory: Trajectory,
    pub report: ScvxReport,
}

/// Initial guess: cubic Hermite path matching both position and velocity
/// boundary conditions, with a thrust whose vertical part hovers. When the
/// engine cannot throttle down to hover the guess burns at minimum thrust,
/// tilted up to the limit with the lateral part alternating sign between
/// nodes, so the linearized minimum-thrust bound is not pinned to vertical.
pub fn initial_guess(
    scenario: &DescentScenario,
    vehicle: &VehicleSpec,
    env: &EnvironmentSpec,
) -> Trajectory {
    let n = scenario.nodes;
    let tf = scenario.tf_init;
    let (r0, v0) = (scenario.initial_position(), scenario.initial_velocity());
    let (rf, vf) = (scenario.target_position(), scenario.target_velocity());
    let hermite = |s: f64| {
        let (s2, s3) = (s * s, s * s * s);
        let r = r0 * (2.0 * s3 - 3.0 * s2 + 1.0)
            + v0 * (tf * (s3 - 2.0 * s2 + s))
            + rf * (-2.0 * s3 + 3.0 * s2)
            + vf * (tf * (s3 - s2));
        let v = (r0 - rf) * ((6.0 * s2 - 6.0 * s) / tf)
            + v0 * (3.0 * s2 - 4.0 * s + 1.0)
            + vf * (3.0 * s2 - 2.0 * s);
        (r, v)
    };
    let g = env.gravity_moon;
    let magnitude = g.max(vehicle.engine.thrust_min / scenario.m0);
    let tilt = (g / magnitude).acos().min(scenario.theta_max.to_radians());
    let offset = (r0 - rf).xy();
    let lateral = if offset.norm() > 1e-9 {
        offset.normalize()
    } else {
        nalgebra::Vector2::x()
    };
    let accel = |j: usize| {
        // The last node repeats the one before it, as a zero-order hold
        // requires.
        let side = if j.min(n - 2) % 2 == 0 { 1.0 } else { -1.0 };
        let h = lateral * (side * magnitude * tilt.sin());
        Vector3::new(h.x, h.y, magnitude * tilt.cos()) * scenario.burn(j)
    };
    let z0 = scenario.m0.ln();
    let z_floor = vehicle.mass_dry.ln();
    let flow = magnitude / (vehicle.engine.isp * env.g0);
    let frac = |j: usize| j as f64 / (n - 1) as f64;
    Trajectory {
        hold: Default::default(),
        final_time: tf,
        position: (0..n).map(|j| hermite(frac(j)).0).collect(),
        velocity: (0..n).map(|j| hermite(frac(j)).1).collect(),
        log_mass: (0..n)
            .map(|j| (z0 - flow * tf * frac(j)).max(z_floor))
            .collect(),
        accel: (0..n).map(accel).collect(),
        slack: (0..n).map(|j| magnitude * scenario.burn(j)).collect(),
    }
}

/// Nonlinear counterpart of the subproblem objective: `-z_N + w_nu * (sum
/// |defect| + sum of minimum-thrust shortfalls)`, with defects from the
/// nominal interval map. Returns the cost and the total violation.
fn nonlinear_cost(
    t: &ScaledTrajectory,
    plant: &Plant,
    params: &ScvxParams,
    min_accel: &[f64],
) -> (f64, f64) {
    let n = t.x.len();
    let mut violation = 0.0;
    for j in 0..n - 1 {
        let next = propagate_interval(
            plant,
            params.hold,
            &t.x[j],
            &t.w[j],
            &t.w[j + 1],
            t.tf,
            n,
            params.substeps,
        );
        violation += (t.x[j + 1] - next).abs().sum();
    }
    for j in 0..n {
        let u = t.w[j].fixed_rows::<3>(0).norm();
        let jl = min_thrust_node(params.hold, j, n);
        violation += (min_accel[j] * (-t.x[jl][6]).exp() - u).max(0.0);
    }
    (
        -t.x[n - 1][6] + params.virtual_control_weight * violation,
        violation,
    )
}

fn max_deviation(a: &ScaledTrajectory, b: &ScaledTrajectory) -> f64 {
    a.x.iter()
        .zip(&b.x)
        .map(|(p, q)| (p - q).norm())
        .fold((a.tf - b.tf).abs(), f64::max)
}

/// Solve a scenario from the straight-line initial guess.
pub fn scvx_solve(
    scenario: &DescentScenario,
    vehicle: &VehicleSpec,
    env: &EnvironmentSpec,
    params: &ScvxParams,
) -> Result<ScvxOutcome, GuidanceError> {
    let guess = initial_guess(scenario, vehicle, env);
    scvx_solve_from(scenario, vehicle, env, params, &guess)
}

/// Solve a scenario starting from a given reference (resampled plans are
/// used as warm starts when replanning).
pub fn scvx_solve_from(
    scenario: &DescentScenario,
    vehicle: &VehicleSpec,
    env: &EnvironmentSpec,
    params: &ScvxParams,
    guess: &Trajectory,
) -> Result<ScvxOutcome, GuidanceError> {
    scenario.validate(vehicle)?;
    vehicle.validate()?;
    env.validate()?;
    params.validate()?;
    if guess.nodes() != scenario.nodes {
        return Err(GuidanceError::Config(
            "initial guess node count does not match the scenario".into(),
        ));
    }
    let scaling = Scaling::new(scenario, vehicle, env);
    let plant = Plant::new(&scaling, env);
    let backend = ClarabelBackend::default();

    // Minimum thrust per node over scaled mass, before the exp(-z) factor.
    let min_accel: Vec<f64> = (0..scenario.nodes)
        .map(|j| scenario.burn(j) * vehicle.engine.thrust_min / scaling.accel)
        .collect();
    let mut reference = guess.to_scaled(&scaling);
    if params.hold == Hold::Zero {
        // The last control has no effect under a zero-order hold and the
        // subproblem pins it to the one before.
        let n = reference.w.len();
        reference.w[n - 1] = reference.w[n - 2];
    }
    // Until a step is accepted, report the guess's own constraint violation.
    let (mut ref_cost, mut ref_nu) = nonlinear_cost(&reference, &plant, params, &min_accel);
    let mut trust = TrustRegion {
        state: params.trust_radius_state,
        tf: params.trust_radius_tf,
    };
    let mut history = Vec::new();
    let mut status = ScvxStatus::NotConverged;
    let mut stalled = 0usize;
    let mut nu_mark = ref_nu;
    let mut since_progress = 0usize;

    for it in 0..params.max_iters {
        if ref_nu < 0.99 * nu_mark {
            nu_mark = ref_nu;
            since_progress = 0;
        } else if it > 0 {
            since_progress += 1;
        }
        if since_progress >= params.progress_window && ref_nu > params.conv_tol_nu {
            status = ScvxStatus::Infeasible;
            break;
        }
        let disc = linearize_scaled(&reference, &plant, params.hold, params.substeps)?;
        let sub = build(&SubproblemInputs {
            scenario,
            vehicle,
            params,
            scaling: &scaling,
            reference: &reference,
            discretization: &disc,
            trust,
        })?;
        let sol = backend.solve(&sub.program, params.solver_tolerance)?;
        let mut record = IterationRecord {
            iteration: it,
            subproblem_status: sol.status,
            accepted: false,
            virtual_control: f64::NAN,
            state_deviation: f64::NAN,
            final_time_s: reference.tf * scaling.time,
            final_mass_kg: reference.x[scenario.nodes - 1][6].exp(),
            ratio: f64::NAN,
            trust_radius: trust.state,
        };
        if sol.status != ConicStatus::Optimal {
            history.push(record);
            if it == 0 && sol.status == ConicStatus::Infeasible {
                status = ScvxStatus::Infeasible;
                break;
            }
            trust.state *= params.shrink;
            trust.tf *= params.shrink;
            if trust.state < params.trust_radius_min {
                break;
            }
            continue;
        }

        let cand = sub.extract(&sol.x, params);
        let (cand_cost, _) = nonlinear_cost(&cand.trajectory, &plant, params, &min_accel);
        let predicted = ref_cost - cand.linear_cost;
        let actual = ref_cost - cand_cost;
        let ratio = if predicted.abs() > 1e-12 {
            actual / predicted
        } else {
            1.0
        };
        let deviation = max_deviation(&cand.trajectory, &reference);
        record.virtual_control = cand.virtual_control;
        record.state_deviation = deviation;
        record.ratio = ratio;
        record.final_time_s = cand.trajectory.tf * scaling.time;
        record.final_mass_kg = cand.trajectory.x[scenario.nodes - 1][6].exp();

        let converged =
            cand.virtual_control <= params.conv_tol_nu && deviation <= params.conv_tol_state;
        if (predicted <= 0.0 || ratio < params.reject_ratio) && !converged {
            history.push(record);
            trust.state *= params.shrink;
            trust.tf *= params.shrink;
            if trust.state < params.trust_radius_min {
                stalled += 1;
                if ref_nu > params.conv_tol_nu && stalled >= params.stall_limit {
                    status = ScvxStatus::Infeasible;
                }
                break;
            }
            continue;
        }

        record.accepted = true;
        history.push(record);
        reference = cand.trajectory;
        ref_cost = cand_cost;
        ref_nu = cand.virtual_control;
        if converged {
            status = ScvxStatus::Converged;
            break;
        }
        if deviation <= params.conv_tol_state * 10.0 && ref_nu > params.conv_tol_nu {
            stalled += 1;
            if stalled >= params.stall_limit {
                status = ScvxStatus::Infeasible;
                break;
            }
        } else {
            stalled = 0;
        }
        if ratio >= params.grow_ratio {
            trust.state = (trust.state * params.grow).min(params.trust_radius_max);
            trust.tf = (trust.tf * params.grow).min(params.trust_radius_max);
        }
    }

    let trajectory = Trajectory::from_scaled(&reference, &scaling, params.hold);
    let nonlinear_defect_m =
        check_solution(&trajectory, scenario, vehicle, env).max_position_defect_m;
    Ok(ScvxOutcome {
        trajectory,
        report: ScvxReport {
            status,
            iterations: history.len(),
            virtual_control: ref_nu,
            nonlinear_defect_m,
            history,
        },
    })
}
