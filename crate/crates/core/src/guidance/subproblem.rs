//! Convex subproblem around a reference trajectory.
//!
//! Variables are the scaled states and controls at every node, the scaled
//! final time, split virtual controls on each interval, projection slacks
//! and the trust-region radii. Linear inequalities go through slack
//! variables since [`ConicProgram`] only holds equalities, bounds and cones.

use nalgebra::Vector3;

use super::discretize::Discretization;
use super::scenario::{DescentScenario, Hold, Scaling, ScvxParams};
use super::trajectory::{Control, ScaledTrajectory, State};
use super::GuidanceError;
use crate::conic::ConicProgram;
use crate::model::VehicleSpec;

/// Variable indices of one subproblem.
#[derive(Debug, Clone)]
pub struct Layout {
    pub x: Vec<[usize; 7]>,
    pub w: Vec<[usize; 4]>,
    pub tf: usize,
    pub nu_pos: Vec<[usize; 7]>,
    pub nu_neg: Vec<[usize; 7]>,
    pub projection_slack: Vec<Option<usize>>,
    pub eta: Vec<usize>,
    pub eta_tf: usize,
}

#[derive(Debug, Clone)]
pub struct Subproblem {
    pub program: ConicProgram,
    pub layout: Layout,
}

/// Trust-region radii in scaled units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustRegion {
    pub state: f64,
    pub tf: f64,
}

/// Solution of a subproblem in scaled units.
#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub trajectory: ScaledTrajectory,
    /// `sum |nu|` over all intervals plus projection slacks.
    pub virtual_control: f64,
    /// Objective without the trust-region weights.
    pub linear_cost: f64,
}

/// Direction used to linearise the thrust lower bound at a node.
fn projection_direction(w: &Control) -> Vector3<f64> {
    let u = Vector3::new(w[0], w[1], w[2]);
    let n = u.norm();
    if n > 1e-9 {
        u / n
    } else {
        Vector3::z()
    }
}

/// Node whose mass sets the minimum-thrust bound on control `j`. Under a
/// zero-order hold the acceleration is constant while mass falls, so the
/// thrust is lowest at the end of the interval.
pub(crate) fn min_thrust_node(hold: Hold, j: usize, nodes: usize) -> usize {
    match hold {
        Hold::Zero if j + 1 < nodes => j + 1,
        _ => j,
    }
}

pub(crate) struct SubproblemInputs<'a> {
    pub scenario: &'a DescentScenario,
    pub vehicle: &'a VehicleSpec,
    pub params: &'a ScvxParams,
    pub scaling: &'a Scaling,
    pub reference: &'a ScaledTrajectory,
    pub discretization: &'a Discretization,
    pub trust: TrustRegion,
}

pub(crate) fn build(inp: &SubproblemInputs<'_>) -> Result<Subproblem, GuidanceError> {
    let sc = inp.scenario;
    let s = inp.scaling;
    let reference = inp.reference;
    let n = sc.nodes;
    if reference.x.len() != n || inp.discretization.intervals.len() != n - 1 {
        return Err(GuidanceError::Config(
            "reference node count does not match the scenario".into(),
        ));
    }
    if !sc.burn_schedule.is_empty() && sc.burn_schedule.iter().all(|&b| b == 0) {
        return Err(GuidanceError::Config(
            "burn_schedule has no powered node".into(),
        ));
    }
    let inf = f64::INFINITY;
    let mut p = ConicProgram::new();

    let z_lo = inp.vehicle.mass_dry.ln();
    let z_hi = sc.m0.ln();
    let x: Vec<[usize; 7]> = (0..n)
        .map(|_| {
            let mut ids = [0; 7];
            for (k, id) in ids.iter_mut().enumerate() {
                *id = if k == 6 {
                    p.add_var(z_lo, z_hi)
                } else {
                    p.add_free()
                };
            }
            ids
        })
        .collect();
    let w: Vec<[usize; 4]> = (0..n)
        .map(|_| {
            let mut ids = [0; 4];
            for (k, id) in ids.iter_mut().enumerate() {
                *id = if k == 3 {
                    p.add_var(0.0, inf)
                } else {
                    p.add_free()
                };
            }
            ids
        })
        .collect();
    let tf = p.add_var(sc.tf_min / s.time, sc.tf_max / s.time);

    // Boundary conditions.
    let r0 = (sc.initial_position() - s.origin) / s.length;
    let v0 = sc.initial_velocity() / s.velocity;
    let rf = (sc.target_position() - s.origin) / s.length;
    let vf = sc.target_velocity() / s.velocity;
    for k in 0..3 {
        p.fix(x[0][k], r0[k]);
        p.fix(x[0][3 + k], v0[k]);
        p.fix(x[n - 1][k], rf[k]);
        p.fix(x[n - 1][3 + k], vf[k]);
    }
    p.fix(x[0][6], z_hi);

    // Dynamics with virtual control.
    let wnu = inp.params.virtual_control_weight;
    let mut nu_pos = Vec::with_capacity(n - 1);
    let mut nu_neg = Vec::with_capacity(n - 1);
    for (j, m) in inp.discretization.intervals.iter().enumerate() {
        let pos: [usize; 7] = std::array::from_fn(|_| p.add_var(0.0, inf));
        let neg: [usize; 7] = std::array::from_fn(|_| p.add_var(0.0, inf));
        for k in 0..7 {
            p.add_objective(pos[k], wnu);
            p.add_objective(neg[k], wnu);
            let mut terms = vec![(x[j + 1][k], 1.0), (pos[k], -1.0), (neg[k], 1.0)];
            for c in 0..7 {
                if m.a[(k, c)] != 0.0 {
                    terms.push((x[j][c], -m.a[(k, c)]));
                }
            }
            for c in 0..4 {
                if m.b_minus[(k, c)] != 0.0 {
                    terms.push((w[j][c], -m.b_minus[(k, c)]));
                }
                if m.b_plus[(k, c)] != 0.0 {
                    terms.push((w[j + 1][c], -m.b_plus[(k, c)]));
                }
            }
            if m.s[k] != 0.0 {
                terms.push((tf, -m.s[k]));
            }
            p.add_equality(terms, m.c[k]);
        }
        nu_pos.push(pos);
        nu_neg.push(neg);
    }

    // Under a zero-order hold the last node's control never acts; tie it to
    // the last active interval so the node constraints stay meaningful.
    if inp.params.hold == Hold::Zero {
        for k in 0..4 {
            p.add_equality(vec![(w[n - 1][k], 1.0), (w[n - 2][k], -1.0)], 0.0);
        }
    }

    let cos_tilt = sc.theta_max.to_radians().cos();
    let tan_gs = sc.gamma_gs.to_radians().tan();
    let rho_min = inp.vehicle.engine.thrust_min / s.accel;
    let rho_max = inp.vehicle.engine.thrust_max / s.accel;
    let mut projection_slack = Vec::with_capacity(n);
    let mut eta = Vec::with_capacity(n);
    for j in 0..n {
        let [ux, uy, uz, xi] = w[j];
        // Glide slope: ||r_xy|| <= tan(gamma) r_z.
        let g = p.add_var(0.0, inf);
        p.add_equality(vec![(g, 1.0), (x[j][2], -tan_gs)], 0.0);
        p.add_cone(g, vec![x[j][0], x[j][1]]);

        // Thrust lift ||u|| <= xi.
        p.add_cone(xi, vec![ux, uy, uz]);

        // Tilt: cos(theta) ||u|| <= u_z.
        let head = p.add_var(0.0, inf);
        p.add_equality(vec![(head, cos_tilt), (uz, -1.0)], 0.0);
        p.add_cone(head, vec![ux, uy, uz]);

        let zbar = reference.x[j][6];
        let jl = min_thrust_node(inp.params.hold, j, n);
        let zbar_lo = reference.x[jl][6];
        if sc.burn(j) > 0.0 {
            let lo = rho_min * (-zbar_lo).exp();
            let hi = rho_max * (-zbar).exp();
            // lo (1 - (z - zbar)) <= xi <= hi (1 - (z - zbar))
            p.add_greater_equal(vec![(xi, 1.0), (x[jl][6], lo)], lo * (1.0 + zbar_lo));
            p.add_greater_equal(vec![(xi, -1.0), (x[j][6], -hi)], -hi * (1.0 + zbar));
            // The actual acceleration, not just its bound, must clear the
            // lower bound: uhat . u + slack >= lo (1 - (z - zbar)).
            let dir = projection_direction(&reference.w[j]);
            let slack = p.add_var(0.0, inf);
            p.add_objective(slack, wnu);
            p.add_greater_equal(
                vec![
                    (ux, dir.x),
                    (uy, dir.y),
                    (uz, dir.z),
                    (x[jl][6], lo),
                    (slack, 1.0),
                ],
                lo * (1.0 + zbar_lo),
            );
            projection_slack.push(Some(slack));
        } else {
            p.set_bounds(xi, 0.0, 0.0);
            projection_slack.push(None);
        }

        // Trust region on the stacked state.
        let dev: [usize; 7] = std::array::from_fn(|_| p.add_free());
        for k in 0..7 {
            p.add_equality(vec![(dev[k], 1.0), (x[j][k], -1.0)], -reference.x[j][k]);
        }
        // Hard, unpenalized bound on the control step. A penalty here would
        // hold the slack above the thrust magnitude at the fixed point.
        let du: [usize; 4] = std::array::from_fn(|_| p.add_free());
        for k in 0..4 {
            p.add_equality(vec![(du[k], 1.0), (w[j][k], -1.0)], -reference.w[j][k]);
        }
        let e_u = p.add_var(0.0, inp.trust.state * inp.params.control_trust_factor);
        p.add_cone(e_u, du.to_vec());
        let e_j = p.add_var(0.0, inp.trust.state);
        p.add_objective(e_j, inp.params.trust_weight);
        p.add_cone(e_j, dev.to_vec());
        eta.push(e_j);
    }
    let dtf = p.add_free();
    p.add_equality(vec![(dtf, 1.0), (tf, -1.0)], -reference.tf);
    let eta_tf = p.add_var(0.0, inp.trust.tf);
    p.add_objective(eta_tf, inp.params.trust_weight);
    p.add_cone(eta_tf, vec![dtf]);

    p.add_objective(x[n - 1][6], -1.0);

    Ok(Subproblem {
        program: p,
        layout: Layout {
            x,
            w,
            tf,
            nu_pos,
            nu_neg,
            projection_slack,
            eta,
            eta_tf,
        },
    })
}

impl Subproblem {
    pub fn extract(&self, sol: &[f64], params: &ScvxParams) -> SubproblemSolution {
        let l = &self.layout;
        let x =
            l.x.iter()
                .map(|ids| State::from_fn(|k, _| sol[ids[k]]))
                .collect::<Vec<_>>();
        let w =
            l.w.iter()
                .map(|ids| Control::from_fn(|k, _| sol[ids[k]]))
                .collect::<Vec<_>>();
        let nu: f64 = l
            .nu_pos
            .iter()
            .chain(&l.nu_neg)
            .flat_map(|ids| ids.iter().map(|&i| sol[i].max(0.0)))
            .sum();
        let slack: f64 = l
            .projection_slack
            .iter()
            .flatten()
            .map(|&i| sol[i].max(0.0))
            .sum();
        let virtual_control = nu + slack;
        let z_final = x[x.len() - 1][6];
        SubproblemSolution {
            trajectory: ScaledTrajectory {
                x,
                w,
                tf: sol[l.tf],
            },
            virtual_control,
            linear_cost: -z_final + params.virtual_control_weight * virtual_control,
        }
    }
}
