use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::model::{EngineSpec, EnvironmentSpec, VehicleSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthState {
    pub t: f64,
    pub r: Vector3<f64>,
    pub v: Vector3<f64>,
    pub m: f64,
}

/// Lateral sinusoidal acceleration, `amplitude sin(2 pi f t) direction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slosh {
    pub amplitude: f64,
    pub frequency_hz: f64,
    pub direction: Vector3<f64>,
}

/// Truth-side conditions held over one integration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Actuation {
    /// `(1 + bias)(1 + noise)` on the lit thrust magnitude.
    pub thrust_factor: f64,
    /// Failure scaling applied after the engine envelope; 0 after shutoff.
    pub degradation: f64,
    /// Pointing rotations applied in order, `(azimuth rad, angle deg)`.
    pub pointing: [(f64, f64); 2],
    pub gravity: f64,
    pub isp: f64,
    pub leak_rate: f64,
    /// Process noise plus constant disturbance accelerations.
    pub accel: Vector3<f64>,
    pub slosh: Option<Slosh>,
}

impl Actuation {
    pub fn nominal(vehicle: &VehicleSpec, env: &EnvironmentSpec) -> Self {
        Self {
            thrust_factor: 1.0,
            degradation: 1.0,
            pointing: [(0.0, 0.0); 2],
            gravity: env.gravity_moon,
            isp: vehicle.engine.isp,
            leak_rate: 0.0,
            accel: Vector3::zeros(),
            slosh: None,
        }
    }
}

/// Engine response to a commanded magnitude: commands in `(0, dead_zone)`
/// produce nothing, commands in `[dead_zone, thrust_min)` light at the
/// minimum, and commands above the maximum saturate.
pub fn dead_zone_law(commanded: f64, engine: &EngineSpec) -> f64 {
    if commanded >= engine.dead_zone {
        commanded.clamp(engine.thrust_min, engine.thrust_max)
    } else {
        0.0
    }
}

/// Unit vectors spanning the plane normal to `d`.
fn normal_basis(d: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if d.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let e1 = d.cross(&helper).normalize();
    (e1, d.cross(&e1))
}

/// Rotate unit vector `d` by `angle_deg` about the axis normal to it at
/// `azimuth`.
pub fn tilt_direction(d: &Vector3<f64>, azimuth: f64, angle_deg: f64) -> Vector3<f64> {
    if angle_deg == 0.0 {
        return *d;
    }
    let (e1, e2) = normal_basis(d);
    let axis = e1 * azimuth.cos() + e2 * azimuth.sin();
    let a = angle_deg.to_radians();
    (d * a.cos() + axis.cross(d) * a.sin()).normalize()
}

/// Thrust actually produced for a command: dead-zone law, bias and noise
/// scaling kept inside the engine envelope, failure degradation, then the
/// pointing errors.
pub fn engine_output(command: &Vector3<f64>, engine: &EngineSpec, act: &Actuation) -> Vector3<f64> {
    let commanded = command.norm();
    let lit = dead_zone_law(commanded, engine);
    if lit == 0.0 || act.degradation == 0.0 {
        return Vector3::zeros();
    }
    let magnitude =
        (lit * act.thrust_factor).clamp(engine.thrust_min, engine.thrust_max) * act.degradation;
    let direction = act
        .pointing
        .iter()
        .fold(command / commanded, |d, &(az, deg)| {
            tilt_direction(&d, az, deg)
        });
    direction * magnitude
}

#[derive(Clone, Copy)]
struct Rate {
    r: Vector3<f64>,
    v: Vector3<f64>,
    m: f64,
}

fn rate(
    t: f64,
    v: &Vector3<f64>,
    m: f64,
    thrust: &Vector3<f64>,
    act: &Actuation,
    vehicle: &VehicleSpec,
    g0: f64,
) -> Rate {
    let empty = m <= vehicle.mass_dry;
    let thrust = if empty { Vector3::zeros() } else { *thrust };
    let mut accel = thrust / m + act.accel - Vector3::z() * act.gravity;
    if let Some(s) = act.slosh {
        accel += s.direction * (s.amplitude * (std::f64::consts::TAU * s.frequency_hz * t).sin());
    }
    let leak = if empty { 0.0 } else { act.leak_rate };
    Rate {
        r: *v,
        v: accel,
        m: -thrust.norm() / (act.isp * g0) - leak,
    }
}

/// Advance the truth state by `dt` with classical RK4. The command is
/// sampled at the stage times, pulled just inside the step so a piecewise
/// command is read from the segment being integrated.
pub fn rk4_step(
    state: &TruthState,
    command: &dyn Fn(f64) -> Vector3<f64>,
    act: &Actuation,
    dt: f64,
    vehicle: &VehicleSpec,
    env: &EnvironmentSpec,
) -> Result<TruthState, SimError> {
    if !(dt > 0.0) || !(state.m > 0.0) {
        return Err(SimError::Fault {
            t: state.t,
            reason: "rk4_step needs dt > 0 and positive mass".into(),
        });
    }
    let edge = 1e-9 * dt;
    let f = |t: f64, v: &Vector3<f64>, m: f64| {
        let t = t.clamp(state.t + edge, state.t + dt - edge);
        let thrust = engine_output(&command(t), &vehicle.engine, act);
        rate(t, v, m, &thrust, act, vehicle, env.g0)
    };
    let (t, r, v, m) = (state.t, state.r, state.v, state.m);
    let h = dt / 2.0;
    let k1 = f(t, &v, m);
    let k2 = f(t + h, &(v + k1.v * h), m + k1.m * h);
    let k3 = f(t + h, &(v + k2.v * h), m + k2.m * h);
    let k4 = f(t + dt, &(v + k3.v * dt), m + k3.m * dt);
    let next = TruthState {
        t: t + dt,
        r: r + (k1.r + k2.r * 2.0 + k3.r * 2.0 + k4.r) * (dt / 6.0),
        v: v + (k1.v + k2.v * 2.0 + k3.v * 2.0 + k4.v) * (dt / 6.0),
        m: m + (k1.m + k2.m * 2.0 + k3.m * 2.0 + k4.m) * (dt / 6.0),
    };
    let finite = next.r.iter().chain(next.v.iter()).all(|x| x.is_finite());
    if !(finite && next.m > 0.0) {
        return Err(SimError::Fault {
            t: next.t,
            reason: "truth state left the physical domain".into(),
        });
    }
    Ok(next)
}
