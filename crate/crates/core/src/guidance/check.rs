use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::scenario::{DescentScenario, Hold};
use super::trajectory::Trajectory;
use crate::model::{EnvironmentSpec, VehicleSpec};

/// Constraint margins of a plan measured on the nonlinear model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    /// Largest node position error after re-propagating the thrust profile, m.
    pub max_position_defect_m: f64,
    /// Largest node velocity error after re-propagation, m/s.
    pub max_velocity_defect_mps: f64,
    pub terminal_position_error_m: f64,
    pub terminal_velocity_error_mps: f64,
    /// Smallest thrust over powered intervals, N.
    pub min_thrust_n: f64,
    pub max_thrust_n: f64,
    /// Nodes whose thrust lies strictly between zero and the minimum thrust.
    pub nodes_below_min_thrust: usize,
    pub max_tilt_deg: f64,
    /// Largest `||r_xy|| - tan(gamma) r_z`, m; non-positive when satisfied.
    pub max_glide_slope_violation_m: f64,
    /// Largest `| ||u|| - xi | / xi` over powered nodes.
    pub max_tightness_gap: f64,
    pub final_mass_kg: f64,
    pub mass_non_increasing: bool,
}

/// Right-hand side of the point-mass model in force units.
fn truth_rate(
    r_v_m: (Vector3<f64>, Vector3<f64>, f64),
    thrust: &Vector3<f64>,
    gravity: &Vector3<f64>,
    exhaust_speed: f64,
) -> (Vector3<f64>, Vector3<f64>, f64) {
    let (_, v, m) = r_v_m;
    (v, thrust / m + gravity, -thrust.norm() / exhaust_speed)
}

/// Re-propagate the plan's thrust profile with RK4 and report constraint
/// margins at every node.
pub fn check_solution(
    traj: &Trajectory,
    scenario: &DescentScenario,
    vehicle: &VehicleSpec,
    env: &EnvironmentSpec,
) -> ConstraintReport {
    const SUBSTEPS: usize = 20;
    let n = traj.nodes();
    let gravity = Vector3::new(0.0, 0.0, -env.gravity_moon);
    let ve = vehicle.engine.isp * env.g0;
    let h_node = traj.final_time / (n - 1) as f64;
    let dt = h_node / SUBSTEPS as f64;

    let mut r = traj.position[0];
    let mut v = traj.velocity[0];
    let mut m = traj.mass(0);
    let mut max_pos: f64 = 0.0;
    let mut max_vel: f64 = 0.0;
    for j in 0..n - 1 {
        for k in 0..SUBSTEPS {
            let t0 = j as f64 * h_node + k as f64 * dt;
            let f = |t: f64| {
                // Sample inside the interval so a zero-order hold is read
                // from its own node at both edges.
                let t = t.clamp(
                    j as f64 * h_node + 1e-9 * h_node,
                    (j + 1) as f64 * h_node - 1e-9 * h_node,
                );
                traj.accel_at(t) * traj.log_mass_at(t).exp()
            };
            let (t_a, t_b, t_c) = (f(t0), f(t0 + dt / 2.0), f(t0 + dt));
            let k1 = truth_rate((r, v, m), &t_a, &gravity, ve);
            let s2 = (
                r + k1.0 * dt / 2.0,
                v + k1.1 * dt / 2.0,
                m + k1.2 * dt / 2.0,
            );
            let k2 = truth_rate(s2, &t_b, &gravity, ve);
            let s3 = (
                r + k2.0 * dt / 2.0,
                v + k2.1 * dt / 2.0,
                m + k2.2 * dt / 2.0,
            );
            let k3 = truth_rate(s3, &t_b, &gravity, ve);
            let s4 = (r + k3.0 * dt, v + k3.1 * dt, m + k3.2 * dt);
            let k4 = truth_rate(s4, &t_c, &gravity, ve);
            r += (k1.0 + k2.0 * 2.0 + k3.0 * 2.0 + k4.0) * (dt / 6.0);
            v += (k1.1 + k2.1 * 2.0 + k3.1 * 2.0 + k4.1) * (dt / 6.0);
            m += (k1.2 + k2.2 * 2.0 + k3.2 * 2.0 + k4.2) * (dt / 6.0);
        }
        max_pos = max_pos.max((r - traj.position[j + 1]).norm());
        max_vel = max_vel.max((v - traj.velocity[j + 1]).norm());
    }

    let tan_gs = scenario.gamma_gs.to_radians().tan();
    let origin = scenario.target_position();
    let mut min_thrust = f64::INFINITY;
    let mut max_thrust: f64 = 0.0;
    let mut below = 0;
    let mut max_tilt: f64 = 0.0;
    let mut max_glide = f64::NEG_INFINITY;
    let mut max_gap: f64 = 0.0;
    for j in 0..n {
        // Under a zero-order hold the thrust falls with the mass across the
        // interval; take the lighter end.
        let end = match traj.hold {
            Hold::Zero => (j + 1).min(n - 1),
            Hold::First => j,
        };
        let thrust = traj.thrust(j).norm();
        let thrust_low = traj.accel[j].norm() * traj.mass(end);
        let powered = j < scenario.nodes && scenario.burn(j) > 0.0;
        if powered {
            min_thrust = min_thrust.min(thrust_low);
            max_thrust = max_thrust.max(thrust);
            if traj.slack[j] > 0.0 {
                let gap = (traj.accel[j].norm() - traj.slack[j]).abs() / traj.slack[j];
                max_gap = max_gap.max(gap);
            }
        }
        if thrust > 0.0 && thrust_low < vehicle.engine.thrust_min {
            below += 1;
        }
        max_tilt = max_tilt.max(traj.tilt_deg(j));
        let d = traj.position[j] - origin;
        max_glide = max_glide.max(d.xy().norm() - tan_gs * d.z);
    }
    if !min_thrust.is_finite() {
        min_thrust = 0.0;
    }
    ConstraintReport {
        max_position_defect_m: max_pos,
        max_velocity_defect_mps: max_vel,
        terminal_position_error_m: (r - scenario.target_position()).norm(),
        terminal_velocity_error_mps: (v - scenario.target_velocity()).norm(),
        min_thrust_n: min_thrust,
        max_thrust_n: max_thrust,
        nodes_below_min_thrust: below,
        max_tilt_deg: max_tilt,
        max_glide_slope_violation_m: max_glide,
        max_tightness_gap: max_gap,
        final_mass_kg: traj.mass(n - 1),
        mass_non_increasing: traj.log_mass.windows(2).all(|p| p[1] <= p[0] + 1e-12),
    }
}
