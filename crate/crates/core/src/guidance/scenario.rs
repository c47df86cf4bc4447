use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::GuidanceError;
use crate::model::{EnvironmentSpec, VehicleSpec};

/// Boundary conditions and constraint settings for one descent problem.
/// Positions are in the landing-site frame with the third axis up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescentScenario {
    #[serde(rename = "initial_position_m")]
    pub r0: [f64; 3],
    #[serde(rename = "initial_velocity_mps")]
    pub v0: [f64; 3],
    #[serde(rename = "initial_mass_kg")]
    pub m0: f64,
    #[serde(rename = "target_position_m")]
    pub rf: [f64; 3],
    #[serde(rename = "target_velocity_mps")]
    pub vf: [f64; 3],
    #[serde(rename = "max_tilt_deg")]
    pub theta_max: f64,
    #[serde(rename = "glide_slope_deg")]
    pub gamma_gs: f64,
    #[serde(rename = "node_count")]
    pub nodes: usize,
    #[serde(rename = "tf_initial_s")]
    pub tf_init: f64,
    #[serde(rename = "tf_min_s")]
    pub tf_min: f64,
    #[serde(rename = "tf_max_s")]
    pub tf_max: f64,
    /// Per-node engine-on flags; empty means engine on at every node.
    #[serde(default, rename = "burn_schedule")]
    pub burn_schedule: Vec<u8>,
}

impl DescentScenario {
    /// The shipped reference hop: 2 km up, 500 m cross-range, descending.
    pub fn reference() -> Self {
        Self {
            r0: [0.0, 500.0, 2000.0],
            v0: [0.0, -15.0, -30.0],
            m0: 259.5,
            rf: [0.0; 3],
            vf: [0.0, 0.0, -1.0],
            theta_max: 60.0,
            gamma_gs: 45.0,
            nodes: 40,
            tf_init: 70.0,
            tf_min: 20.0,
            tf_max: 200.0,
            burn_schedule: Vec::new(),
        }
    }

    pub fn initial_position(&self) -> Vector3<f64> {
        Vector3::from(self.r0)
    }

    pub fn initial_velocity(&self) -> Vector3<f64> {
        Vector3::from(self.v0)
    }

    pub fn target_position(&self) -> Vector3<f64> {
        Vector3::from(self.rf)
    }

    pub fn target_velocity(&self) -> Vector3<f64> {
        Vector3::from(self.vf)
    }

    /// Engine-on flag for node `j` as 0.0 or 1.0.
    pub fn burn(&self, j: usize) -> f64 {
        if self.burn_schedule.is_empty() {
            1.0
        } else {
            f64::from(self.burn_schedule[j])
        }
    }

    pub fn validate(&self, vehicle: &VehicleSpec) -> Result<(), GuidanceError> {
        let bad = |m: &str| Err(GuidanceError::Config(m.to_string()));
        let finite = self
            .r0
            .iter()
            .chain(&self.v0)
            .chain(&self.rf)
            .chain(&self.vf)
            .chain([&self.m0, &self.tf_init, &self.tf_min, &self.tf_max])
            .all(|x| x.is_finite());
        if !finite {
            return bad("scenario values must be finite");
        }
        if self.nodes < 10 {
            return bad("node_count must be at least 10");
        }
        if !(self.tf_min > 0.0 && self.tf_min <= self.tf_init && self.tf_init <= self.tf_max) {
            return bad("final-time bounds must satisfy 0 < tf_min <= tf_initial <= tf_max");
        }
        if !(self.theta_max > 0.0 && self.theta_max < 90.0) {
            return bad("max_tilt_deg must lie in (0, 90)");
        }
        if !(self.gamma_gs > 0.0 && self.gamma_gs < 90.0) {
            return bad("glide_slope_deg must lie in (0, 90)");
        }
        // Dispersed replans may start slightly above the nominal wet mass.
        if !(self.m0 > vehicle.mass_dry) {
            return bad("initial_mass_kg must exceed mass_dry");
        }
        if !self.burn_schedule.is_empty() {
            if self.burn_schedule.len() != self.nodes {
                return bad("burn_schedule length must equal node_count");
            }
            if self.burn_schedule.iter().any(|&b| b > 1) {
                return bad("burn_schedule entries must be 0 or 1");
            }
            if self.burn_schedule.iter().all(|&b| b == 0) {
                return bad("burn_schedule has no powered node");
            }
        }
        Ok(())
    }
}

impl Default for DescentScenario {
    fn default() -> Self {
        Self::reference()
    }
}

/// Control interpolation between nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hold {
    /// Piecewise-constant control over each interval.
    #[default]
    Zero,
    /// Piecewise-linear control between nodes.
    First,
}

/// Successive-convexification settings. Radii and tolerances are in scaled units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScvxParams {
    pub hold: Hold,
    /// RK4 steps per interval when integrating the variational equations.
    pub substeps: usize,
    pub max_iters: usize,
    pub virtual_control_weight: f64,
    /// Weight of the trust-region radius variables in the subproblem objective.
    pub trust_weight: f64,
    pub trust_radius_state: f64,
    pub trust_radius_tf: f64,
    /// Bound on the per-node control step as a multiple of the state radius.
    pub control_trust_factor: f64,
    pub trust_radius_min: f64,
    pub trust_radius_max: f64,
    pub shrink: f64,
    pub grow: f64,
    pub reject_ratio: f64,
    pub grow_ratio: f64,
    pub conv_tol_state: f64,
    pub conv_tol_nu: f64,
    /// Consecutive stalled iterations with non-vanishing virtual control
    /// before the scenario is declared infeasible.
    pub stall_limit: usize,
    /// Iterations without a 1% drop in virtual control, while it stays
    /// non-vanishing, before the scenario is declared infeasible.
    pub progress_window: usize,
    pub solver_tolerance: f64,
}

impl Default for ScvxParams {
    fn default() -> Self {
        Self {
            hold: Hold::Zero,
            substeps: 4,
            max_iters: 30,
            virtual_control_weight: 3e3,
            trust_weight: 3e-2,
            trust_radius_state: 0.25,
            trust_radius_tf: 0.25,
            control_trust_factor: 5.0,
            trust_radius_min: 1e-6,
            trust_radius_max: 10.0,
            shrink: 0.5,
            grow: 2.0,
            reject_ratio: 0.1,
            grow_ratio: 0.7,
            conv_tol_state: 1e-5,
            conv_tol_nu: 1e-7,
            stall_limit: 3,
            progress_window: 10,
            solver_tolerance: 1e-9,
        }
    }
}

impl ScvxParams {
    pub fn validate(&self) -> Result<(), GuidanceError> {
        let positive = [
            self.virtual_control_weight,
            self.trust_radius_state,
            self.trust_radius_tf,
            self.control_trust_factor,
            self.trust_radius_min,
            self.trust_radius_max,
            self.shrink,
            self.grow,
            self.reject_ratio,
            self.grow_ratio,
            self.conv_tol_state,
            self.conv_tol_nu,
            self.solver_tolerance,
        ];
        if positive.iter().any(|x| !(*x > 0.0 && x.is_finite())) || self.trust_weight < 0.0 {
            return Err(GuidanceError::Config(
                "SCvx parameters must be positive".into(),
            ));
        }
        if !(self.shrink < 1.0 && self.grow > 1.0) {
            return Err(GuidanceError::Config("need shrink < 1 < grow".into()));
        }
        if self.reject_ratio > self.grow_ratio {
            return Err(GuidanceError::Config(
                "reject_ratio must not exceed grow_ratio".into(),
            ));
        }
        if self.max_iters == 0
            || self.substeps == 0
            || self.stall_limit == 0
            || self.progress_window == 0
        {
            return Err(GuidanceError::Config(
                "max_iters, substeps, stall_limit and progress_window must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Nondimensionalisation used before handing subproblems to the solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling {
    pub length: f64,
    pub time: f64,
    pub velocity: f64,
    pub accel: f64,
    /// Log-mass rate per unit scaled slack per unit scaled time.
    pub alpha: f64,
    pub origin: Vector3<f64>,
}

impl Scaling {
    pub fn new(scenario: &DescentScenario, vehicle: &VehicleSpec, env: &EnvironmentSpec) -> Self {
        let altitude = scenario.r0[2] - scenario.rf[2];
        let length = altitude.max(1.0);
        let accel = env.gravity_moon;
        let time = (length / accel).sqrt();
        Self {
            length,
            time,
            velocity: length / time,
            accel,
            alpha: accel * time / (vehicle.engine.isp * env.g0),
            origin: scenario.target_position(),
        }
    }

    /// Scaled gravity vector.
    pub fn gravity(&self, env: &EnvironmentSpec) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, -env.gravity_moon / self.accel)
    }
}
