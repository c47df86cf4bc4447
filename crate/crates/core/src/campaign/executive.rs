use serde::{Deserialize, Serialize};

use super::CampaignError;
use crate::guidance::{
    scvx_solve, scvx_solve_from, DescentScenario, ScvxParams, ScvxStatus, Trajectory,
};
use crate::model::{EnvironmentSpec, VehicleSpec};
use crate::sim::{FlightRecord, FlightSim, RunSetup, SimError};

/// Replanning cadence and the terminal gate after which the last plan is
/// flown out unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClosedLoopParams {
    pub replan_period_s: f64,
    pub terminal_altitude_m: f64,
    pub terminal_time_to_go_s: f64,
    /// Floor on the node count of a replan.
    pub min_nodes: usize,
    /// Floor on the shrunk lower final-time bound of a replan, s.
    pub min_horizon_s: f64,
}

impl Default for ClosedLoopParams {
    fn default() -> Self {
        Self {
            replan_period_s: 10.0,
            terminal_altitude_m: 50.0,
            terminal_time_to_go_s: 8.0,
            min_nodes: 10,
            min_horizon_s: 1.0,
        }
    }
}

impl ClosedLoopParams {
    pub fn validate(&self) -> Result<(), CampaignError> {
        let positive = [
            self.replan_period_s,
            self.terminal_time_to_go_s,
            self.min_horizon_s,
        ];
        if !positive.iter().all(|x| x.is_finite() && *x > 0.0) {
            return Err(CampaignError::Config(
                "replan period, terminal time-to-go and minimum horizon must be positive".into(),
            ));
        }
        if !(self.terminal_altitude_m.is_finite() && self.terminal_altitude_m >= 0.0) {
            return Err(CampaignError::Config(
                "terminal_altitude_m must be non-negative".into(),
            ));
        }
        if self.min_nodes < 10 {
            return Err(CampaignError::Config(
                "min_nodes must be at least 10".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of one replan attempt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplanEvent {
    pub time_s: f64,
    pub nodes: usize,
    pub status: ScvxStatus,
    pub iterations: usize,
    /// Absolute end time of the plan in force after this replan.
    pub plan_end_s: f64,
    /// Largest node tilt of the new plan; zero on fallback.
    pub max_tilt_deg: f64,
    /// The warm start failed and a cold solve was attempted.
    pub cold_retry: bool,
    /// No solve converged and the previous plan stayed in force.
    pub fallback: bool,
}

impl ReplanEvent {
    pub fn converged(&self) -> bool {
        self.status == ScvxStatus::Converged
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopFlight {
    pub record: FlightRecord,
    pub replans: Vec<ReplanEvent>,
}

/// Closed-loop failure keeps the replans made before the fault.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopFault {
    pub error: SimError,
    pub replans: Vec<ReplanEvent>,
}

/// Scenario for a replan at absolute time `t` from the truth state.
fn replan_scenario(
    base: &DescentScenario,
    nominal: &Trajectory,
    sim: &FlightSim,
    remaining: f64,
    policy: &ClosedLoopParams,
) -> DescentScenario {
    let s = sim.state();
    let elapsed = s.t;
    let step = nominal.final_time / (base.nodes - 1) as f64;
    let nodes = ((remaining / step).round() as usize + 1).clamp(policy.min_nodes, base.nodes);
    let tf_min = (base.tf_min - elapsed).max(policy.min_horizon_s);
    let tf_max = (base.tf_max - elapsed).max(tf_min);
    // Coast flags follow the nominal node nearest in absolute time.
    let burn_schedule = if base.burn_schedule.is_empty() {
        Vec::new()
    } else {
        (0..nodes)
            .map(|k| {
                let t = elapsed + remaining * k as f64 / (nodes - 1) as f64;
                base.burn_schedule[((t / step).round() as usize).min(base.nodes - 1)]
            })
            .collect()
    };
    let mut sc = DescentScenario {
        r0: s.r.into(),
        v0: s.v.into(),
        m0: s.m,
        nodes,
        tf_init: remaining.clamp(tf_min, tf_max),
        tf_min,
        tf_max,
        burn_schedule,
        ..base.clone()
    };
    if sc.burn_schedule.iter().all(|&b| b == 0) {
        sc.burn_schedule.clear();
    }
    sc
}

/// Fly the nominal plan and re-solve from the truth state every replan
/// period until the terminal gate closes.
///
/// The first segment tracks `nominal`. Each replan warm-starts from the
/// current plan resampled over the time remaining, retries cold on failure,
/// and keeps the current plan if neither solve converges.
pub fn run_closed_loop(
    scenario: &DescentScenario,
    nominal: &Trajectory,
    setup: &RunSetup,
    vehicle: &VehicleSpec,
    env: &EnvironmentSpec,
    params: &ScvxParams,
    policy: &ClosedLoopParams,
) -> Result<ClosedLoopFlight, ClosedLoopFault> {
    let n = nominal.nodes();
    let initial = setup.initial_state(nominal.position[0], nominal.velocity[0], nominal.mass(0));
    let mut sim = FlightSim::new(initial, nominal.position[n - 1], setup, vehicle, env);
    let horizon = 2.0 * nominal.final_time;
    let mut plan = nominal.clone();
    let mut plan_t0 = 0.0;
    let mut breakpoints = plan.times();
    let mut next_replan = policy.replan_period_s;
    let mut gate_open = true;
    let mut replans = Vec::new();

    while sim.touchdown().is_none() {
        let t = sim.state().t;
        if t > horizon {
            return Err(ClosedLoopFault {
                error: SimError::Timeout { t },
                replans,
            });
        }
        if gate_open && t >= next_replan - 1e-9 {
            next_replan += policy.replan_period_s;
            let remaining = plan_t0 + plan.final_time - t;
            if sim.altitude() < policy.terminal_altitude_m
                || remaining < policy.terminal_time_to_go_s
            {
                gate_open = false;
            } else {
                let sc = replan_scenario(scenario, nominal, &sim, remaining, policy);
                let (event, solved) = replan(&sc, &plan, t - plan_t0, vehicle, env, params, t);
                replans.push(event);
                if let Some(next) = solved {
                    plan = next;
                    plan_t0 = t;
                    breakpoints = plan.times().iter().map(|b| b + plan_t0).collect();
                }
            }
        }
        let command = |tt: f64| plan.thrust_command(tt - plan_t0);
        if let Err(error) = sim.step(&command, &breakpoints) {
            return Err(ClosedLoopFault { error, replans });
        }
    }
    match sim.finish() {
        Ok(record) => Ok(ClosedLoopFlight { record, replans }),
        Err(error) => Err(ClosedLoopFault { error, replans }),
    }
}

fn replan(
    sc: &DescentScenario,
    plan: &Trajectory,
    plan_elapsed: f64,
    vehicle: &VehicleSpec,
    env: &EnvironmentSpec,
    params: &ScvxParams,
    t: f64,
) -> (ReplanEvent, Option<Trajectory>) {
    let mut event = ReplanEvent {
        time_s: t,
        nodes: sc.nodes,
        status: ScvxStatus::Infeasible,
        iterations: 0,
        plan_end_s: t - plan_elapsed + plan.final_time,
        max_tilt_deg: 0.0,
        cold_retry: false,
        fallback: true,
    };
    if sc.validate(vehicle).is_err() {
        return (event, None);
    }
    let guess = plan.resample_from(plan_elapsed, sc.nodes);
    let mut attempt = scvx_solve_from(sc, vehicle, env, params, &guess);
    if !matches!(&attempt, Ok(out) if out.report.converged()) {
        event.cold_retry = true;
        let cold = scvx_solve(sc, vehicle, env, params);
        if cold.is_ok() || attempt.is_err() {
            attempt = cold;
        }
    }
    match attempt {
        Ok(out) => {
            event.status = out.report.status;
            event.iterations = out.report.iterations;
            if out.report.converged() {
                event.fallback = false;
                let tr = &out.trajectory;
                event.plan_end_s = t + tr.final_time;
                event.max_tilt_deg = (0..tr.nodes()).map(|j| tr.tilt_deg(j)).fold(0.0, f64::max);
                return (event, Some(out.trajectory));
            }
            (event, None)
        }
        Err(_) => (event, None),
    }
}
