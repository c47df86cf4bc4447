//! Per-interval affine models of the time-normalised log-mass dynamics
//!
//! ```text
//! r' = tf v,   v' = tf (u + g),   z' = -tf alpha xi,   tau in [0, 1]
//! ```
//!
//! obtained by RK4 integration of the variational equations along a
//! reference.

use nalgebra::{SMatrix, Vector3};

use super::scenario::{DescentScenario, Hold, Scaling, ScvxParams};
use super::trajectory::{Control, ScaledTrajectory, State, Trajectory};
use super::GuidanceError;
use crate::model::{EnvironmentSpec, VehicleSpec};

pub type Mat7 = SMatrix<f64, 7, 7>;
pub type Mat74 = SMatrix<f64, 7, 4>;

/// Scaled point-mass plant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plant {
    pub gravity: Vector3<f64>,
    pub alpha: f64,
}

impl Plant {
    pub fn new(scaling: &Scaling, env: &EnvironmentSpec) -> Self {
        Self {
            gravity: scaling.gravity(env),
            alpha: scaling.alpha,
        }
    }

    /// Time derivative in scaled time (before multiplying by tf).
    pub fn rate(&self, x: &State, w: &Control) -> State {
        State::from_column_slice(&[
            x[3],
            x[4],
            x[5],
            w[0] + self.gravity.x,
            w[1] + self.gravity.y,
            w[2] + self.gravity.z,
            -self.alpha * w[3],
        ])
    }

    pub fn rate_jacobian_state(&self, _x: &State, _w: &Control) -> Mat7 {
        let mut a = Mat7::zeros();
        for k in 0..3 {
            a[(k, 3 + k)] = 1.0;
        }
        a
    }

    pub fn rate_jacobian_control(&self, _x: &State, _w: &Control) -> Mat74 {
        let mut b = Mat74::zeros();
        for k in 0..3 {
            b[(3 + k, k)] = 1.0;
        }
        b[(6, 3)] = -self.alpha;
        b
    }
}

/// Interpolation weights `(on w_j, on w_{j+1})` at local fraction `lam`.
fn hold_weights(hold: Hold, lam: f64) -> (f64, f64) {
    match hold {
        Hold::Zero => (1.0, 0.0),
        Hold::First => (1.0 - lam, lam),
    }
}

/// Affine model `x_{j+1} = A x_j + B- w_j + B+ w_{j+1} + S tf + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalModel {
    pub a: Mat7,
    pub b_minus: Mat74,
    pub b_plus: Mat74,
    pub s: State,
    pub c: State,
}

impl IntervalModel {
    pub fn predict(&self, x: &State, w0: &Control, w1: &Control, tf: f64) -> State {
        self.a * x + self.b_minus * w0 + self.b_plus * w1 + self.s * tf + self.c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discretization {
    pub hold: Hold,
    pub plant: Plant,
    pub intervals: Vec<IntervalModel>,
}

/// Nominal interval map: integrate the plant over one interval of width
/// `1 / (nodes - 1)` in normalised time.
pub fn propagate_interval(
    plant: &Plant,
    hold: Hold,
    x: &State,
    w0: &Control,
    w1: &Control,
    tf: f64,
    nodes: usize,
    substeps: usize,
) -> State {
    let width = 1.0 / (nodes - 1) as f64;
    let h = width / substeps as f64;
    let ctrl = |lam: f64| {
        let (a, b) = hold_weights(hold, lam);
        w0 * a + w1 * b
    };
    let rhs = |x: &State, lam: f64| plant.rate(x, &ctrl(lam)) * tf;
    let mut x = *x;
    for k in 0..substeps {
        let l0 = k as f64 / substeps as f64;
        let lh = (k as f64 + 0.5) / substeps as f64;
        let l1 = (k + 1) as f64 / substeps as f64;
        let k1 = rhs(&x, l0);
        let k2 = rhs(&(x + k1 * (h / 2.0)), lh);
        let k3 = rhs(&(x + k2 * (h / 2.0)), lh);
        let k4 = rhs(&(x + k3 * h), l1);
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    x
}

#[derive(Clone, Copy)]
struct Sensitivity {
    x: State,
    px: Mat7,
    pm: Mat74,
    pp: Mat74,
    pt: State,
}

impl Sensitivity {
    fn plus(&self, k: &Sensitivity, h: f64) -> Sensitivity {
        Sensitivity {
            x: self.x + k.x * h,
            px: self.px + k.px * h,
            pm: self.pm + k.pm * h,
            pp: self.pp + k.pp * h,
            pt: self.pt + k.pt * h,
        }
    }
}

/// Linearise one interval by integrating the state together with its
/// sensitivities to the initial state, both node controls and tf.
pub fn linearize_interval(
    plant: &Plant,
    hold: Hold,
    x0: &State,
    w0: &Control,
    w1: &Control,
    tf: f64,
    nodes: usize,
    substeps: usize,
) -> IntervalModel {
    let width = 1.0 / (nodes - 1) as f64;
    let h = width / substeps as f64;
    let rhs = |s: &Sensitivity, lam: f64| {
        let (lm, lp) = hold_weights(hold, lam);
        let w = w0 * lm + w1 * lp;
        let f = plant.rate(&s.x, &w);
        let a = plant.rate_jacobian_state(&s.x, &w);
        let b = plant.rate_jacobian_control(&s.x, &w);
        Sensitivity {
            x: f * tf,
            px: a * s.px * tf,
            pm: (a * s.pm + b * lm) * tf,
            pp: (a * s.pp + b * lp) * tf,
            pt: a * s.pt * tf + f,
        }
    };
    let mut s = Sensitivity {
        x: *x0,
        px: Mat7::identity(),
        pm: Mat74::zeros(),
        pp: Mat74::zeros(),
        pt: State::zeros(),
    };
    for k in 0..substeps {
        let l0 = k as f64 / substeps as f64;
        let lh = (k as f64 + 0.5) / substeps as f64;
        let l1 = (k + 1) as f64 / substeps as f64;
        let k1 = rhs(&s, l0);
        let k2 = rhs(&s.plus(&k1, h / 2.0), lh);
        let k3 = rhs(&s.plus(&k2, h / 2.0), lh);
        let k4 = rhs(&s.plus(&k3, h), l1);
        s = Sensitivity {
            x: s.x + (k1.x + k2.x * 2.0 + k3.x * 2.0 + k4.x) * (h / 6.0),
            px: s.px + (k1.px + k2.px * 2.0 + k3.px * 2.0 + k4.px) * (h / 6.0),
            pm: s.pm + (k1.pm + k2.pm * 2.0 + k3.pm * 2.0 + k4.pm) * (h / 6.0),
            pp: s.pp + (k1.pp + k2.pp * 2.0 + k3.pp * 2.0 + k4.pp) * (h / 6.0),
            pt: s.pt + (k1.pt + k2.pt * 2.0 + k3.pt * 2.0 + k4.pt) * (h / 6.0),
        };
    }
    let c = s.x - s.px * x0 - s.pm * w0 - s.pp * w1 - s.pt * tf;
    IntervalModel {
        a: s.px,
        b_minus: s.pm,
        b_plus: s.pp,
        s: s.pt,
        c,
    }
}

/// Linearise every interval of a scaled reference.
pub fn linearize_scaled(
    reference: &ScaledTrajectory,
    plant: &Plant,
    hold: Hold,
    substeps: usize,
) -> Result<Discretization, GuidanceError> {
    let finite = reference.tf.is_finite()
        && reference.x.iter().all(|x| x.iter().all(|v| v.is_finite()))
        && reference.w.iter().all(|w| w.iter().all(|v| v.is_finite()));
    if !finite {
        return Err(GuidanceError::Linearization(
            "reference contains non-finite values".into(),
        ));
    }
    let n = reference.x.len();
    if n < 2 || reference.w.len() != n {
        return Err(GuidanceError::Linearization(
            "reference needs matching state and control nodes".into(),
        ));
    }
    let intervals = (0..n - 1)
        .map(|j| {
            linearize_interval(
                plant,
                hold,
                &reference.x[j],
                &reference.w[j],
                &reference.w[j + 1],
                reference.tf,
                n,
                substeps,
            )
        })
        .collect();
    Ok(Discretization {
        hold,
        plant: *plant,
        intervals,
    })
}

/// Linearise a physical-unit reference in the scaled coordinates used by
/// the subproblem.
pub fn linearize_discretize(
    reference: &Trajectory,
    scenario: &DescentScenario,
    vehicle: &VehicleSpec,
    env: &EnvironmentSpec,
    params: &ScvxParams,
) -> Result<Discretization, GuidanceError> {
    let scaling = Scaling::new(scenario, vehicle, env);
    let plant = Plant::new(&scaling, env);
    linearize_scaled(
        &reference.to_scaled(&scaling),
        &plant,
        params.hold,
        params.substeps,
    )
}
