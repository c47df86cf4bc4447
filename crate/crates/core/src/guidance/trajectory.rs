use nalgebra::{SVector, Vector3};

use super::scenario::{Hold, Scaling};
use super::GuidanceError;

pub type State = SVector<f64, 7>;
pub type Control = SVector<f64, 4>;

/// A discretised descent plan in physical units.
///
/// `accel` is the thrust acceleration `u = T/m` and `slack` its magnitude
/// bound `xi`, both in m/s^2. Node times are uniform on `[0, final_time]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub hold: Hold,
    pub final_time: f64,
    pub position: Vec<Vector3<f64>>,
    pub velocity: Vec<Vector3<f64>>,
    pub log_mass: Vec<f64>,
    pub accel: Vec<Vector3<f64>>,
    pub slack: Vec<f64>,
}

/// Trajectory in solver units: stacked states `(r, v, z)`, controls `(u, xi)`
/// and scaled final time.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledTrajectory {
    pub x: Vec<State>,
    pub w: Vec<Control>,
    pub tf: f64,
}

impl Trajectory {
    pub fn nodes(&self) -> usize {
        self.position.len()
    }

    pub fn time(&self, j: usize) -> f64 {
        self.final_time * j as f64 / (self.nodes() - 1) as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.nodes()).map(|j| self.time(j)).collect()
    }

    pub fn mass(&self, j: usize) -> f64 {
        self.log_mass[j].exp()
    }

    /// Thrust force at node `j`, N.
    pub fn thrust(&self, j: usize) -> Vector3<f64> {
        self.accel[j] * self.mass(j)
    }

    /// Thrust magnitude implied by the slack, `m * xi`, N.
    pub fn thrust_bound(&self, j: usize) -> f64 {
        self.slack[j] * self.mass(j)
    }

    /// Angle between the thrust vector and vertical, degrees; zero when off.
    pub fn tilt_deg(&self, j: usize) -> f64 {
        tilt_of(&self.accel[j])
    }

    /// Interval index and local fraction for time `t`, clamped to the plan.
    fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.nodes();
        let h = self.final_time / (n - 1) as f64;
        let s = (t / h).clamp(0.0, (n - 1) as f64);
        let j = (s.floor() as usize).min(n - 2);
        (j, s - j as f64)
    }

    pub fn log_mass_at(&self, t: f64) -> f64 {
        let (j, lam) = self.locate(t);
        self.log_mass[j] + lam * (self.log_mass[j + 1] - self.log_mass[j])
    }

    pub fn accel_at(&self, t: f64) -> Vector3<f64> {
        let (j, lam) = self.locate(t);
        match self.hold {
            Hold::Zero => self.accel[j],
            Hold::First => self.accel[j] * (1.0 - lam) + self.accel[j + 1] * lam,
        }
    }

    pub fn slack_at(&self, t: f64) -> f64 {
        let (j, lam) = self.locate(t);
        match self.hold {
            Hold::Zero => self.slack[j],
            Hold::First => self.slack[j] * (1.0 - lam) + self.slack[j + 1] * lam,
        }
    }

    pub fn position_at(&self, t: f64) -> Vector3<f64> {
        let (j, lam) = self.locate(t);
        self.position[j] * (1.0 - lam) + self.position[j + 1] * lam
    }

    pub fn velocity_at(&self, t: f64) -> Vector3<f64> {
        let (j, lam) = self.locate(t);
        self.velocity[j] * (1.0 - lam) + self.velocity[j + 1] * lam
    }

    /// Commanded thrust force at plan time `t`: `exp(z(t)) * u(t)`, zero
    /// outside `[0, final_time)`.
    pub fn thrust_command(&self, t: f64) -> Vector3<f64> {
        if !(0.0..self.final_time).contains(&t) {
            return Vector3::zeros();
        }
        self.accel_at(t) * self.log_mass_at(t).exp()
    }

    /// The remainder of the plan from time `t0`, resampled onto `nodes`
    /// uniform nodes over `[t0, final_time]`. Used to warm-start replans.
    pub fn resample_from(&self, t0: f64, nodes: usize) -> Trajectory {
        let remaining = (self.final_time - t0).max(1e-6);
        let at = |k: usize| t0 + remaining * k as f64 / (nodes - 1) as f64;
        Trajectory {
            hold: self.hold,
            final_time: remaining,
            position: (0..nodes).map(|k| self.position_at(at(k))).collect(),
            velocity: (0..nodes).map(|k| self.velocity_at(at(k))).collect(),
            log_mass: (0..nodes).map(|k| self.log_mass_at(at(k))).collect(),
            accel: (0..nodes).map(|k| self.accel_at(at(k))).collect(),
            slack: (0..nodes).map(|k| self.slack_at(at(k))).collect(),
        }
    }

    pub fn to_scaled(&self, s: &Scaling) -> ScaledTrajectory {
        let x = (0..self.nodes())
            .map(|j| {
                let r = (self.position[j] - s.origin) / s.length;
                let v = self.velocity[j] / s.velocity;
                State::from_column_slice(&[r.x, r.y, r.z, v.x, v.y, v.z, self.log_mass[j]])
            })
            .collect();
        let w = (0..self.nodes())
            .map(|j| {
                let u = self.accel[j] / s.accel;
                Control::new(u.x, u.y, u.z, self.slack[j] / s.accel)
            })
            .collect();
        ScaledTrajectory {
            x,
            w,
            tf: self.final_time / s.time,
        }
    }

    pub fn from_scaled(st: &ScaledTrajectory, s: &Scaling, hold: Hold) -> Self {
        Self {
            hold,
            final_time: st.tf * s.time,
            position: st
                .x
                .iter()
                .map(|x| Vector3::new(x[0], x[1], x[2]) * s.length + s.origin)
                .collect(),
            velocity: st
                .x
                .iter()
                .map(|x| Vector3::new(x[3], x[4], x[5]) * s.velocity)
                .collect(),
            log_mass: st.x.iter().map(|x| x[6]).collect(),
            accel: st
                .w
                .iter()
                .map(|w| Vector3::new(w[0], w[1], w[2]) * s.accel)
                .collect(),
            slack: st.w.iter().map(|w| w[3] * s.accel).collect(),
        }
    }

    /// One row per node: t, rx, ry, rz, vx, vy, vz, mass, Tx, Ty, Tz,
    /// thrust_mag, tilt_deg.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(TRAJECTORY_COLUMNS).expect("in-memory write");
        for j in 0..self.nodes() {
            let (r, v, t) = (self.position[j], self.velocity[j], self.thrust(j));
            let row = [
                self.time(j),
                r.x,
                r.y,
                r.z,
                v.x,
                v.y,
                v.z,
                self.mass(j),
                t.x,
                t.y,
                t.z,
                self.thrust_bound(j),
                self.tilt_deg(j),
            ];
            w.write_record(row.iter().map(|x| fmt_sig(*x)))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    pub fn from_csv(text: &str, hold: Hold) -> Result<Self, GuidanceError> {
        let io = |e: csv::Error| GuidanceError::Io(e.to_string());
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = rd.headers().map_err(io)?.iter().map(String::from).collect();
        if header != TRAJECTORY_COLUMNS {
            return Err(GuidanceError::Io(format!(
                "unexpected trajectory header {header:?}"
            )));
        }
        let mut traj = Trajectory {
            hold,
            final_time: 0.0,
            position: vec![],
            velocity: vec![],
            log_mass: vec![],
            accel: vec![],
            slack: vec![],
        };
        for rec in rd.records() {
            let rec = rec.map_err(io)?;
            let f: Vec<f64> = rec
                .iter()
                .map(|c| c.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| GuidanceError::Io(e.to_string()))?;
            let m = f[7];
            traj.final_time = f[0];
            traj.position.push(Vector3::new(f[1], f[2], f[3]));
            traj.velocity.push(Vector3::new(f[4], f[5], f[6]));
            traj.log_mass.push(m.ln());
            traj.accel.push(Vector3::new(f[8], f[9], f[10]) / m);
            traj.slack.push(f[11] / m);
        }
        if traj.nodes() < 2 {
            return Err(GuidanceError::Io(
                "trajectory needs at least two rows".into(),
            ));
        }
        Ok(traj)
    }
}

pub const TRAJECTORY_COLUMNS: [&str; 13] = [
    "t",
    "rx",
    "ry",
    "rz",
    "vx",
    "vy",
    "vz",
    "mass",
    "Tx",
    "Ty",
    "Tz",
    "thrust_mag",
    "tilt_deg",
];

pub(crate) fn tilt_of(a: &Vector3<f64>) -> f64 {
    let n = a.norm();
    if n <= 0.0 {
        return 0.0;
    }
    (a.z / n).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Shortest decimal form of `x` rounded to 9 significant digits, in
/// exponent form for magnitudes below 1e-4 or from 1e16.
pub fn fmt_sig(x: f64) -> String {
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    let a = rounded.abs();
    if a != 0.0 && !(1e-4..1e16).contains(&a) {
        format!("{rounded:e}")
    } else {
        format!("{rounded}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trajectory {
        let n = 5;
        Trajectory {
            hold: Hold::Zero,
            final_time: 8.0,
            position: (0..n)
                .map(|j| Vector3::new(1.0, 2.0, 100.0 - 10.0 * j as f64))
                .collect(),
            velocity: (0..n).map(|_| Vector3::new(0.0, 0.0, -5.0)).collect(),
            log_mass: (0..n).map(|j| (250.0 - j as f64).ln()).collect(),
            accel: (0..n)
                .map(|j| Vector3::new(0.1 * j as f64, 0.0, 3.0))
                .collect(),
            slack: (0..n)
                .map(|j| (9.0 + 0.01 * (j * j) as f64).sqrt())
                .collect(),
        }
    }

    #[test]
    fn sig_formatting() {
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(0.1234567891234), "0.123456789");
        assert_eq!(fmt_sig(-2500.0), "-2500");
        assert_eq!(fmt_sig(8.645925461e-9), "8.64592546e-9");
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1e-4), "0.0001");
    }

    #[test]
    fn csv_round_trip_to_nine_digits() {
        let t = sample();
        let back = Trajectory::from_csv(&t.to_csv(), Hold::Zero).unwrap();
        assert_eq!(back.nodes(), t.nodes());
        assert!((back.final_time - t.final_time).abs() < 1e-12);
        for j in 0..t.nodes() {
            assert!((back.position[j] - t.position[j]).norm() < 1e-6);
            assert!((back.mass(j) - t.mass(j)).abs() < 1e-6);
            assert!((back.accel[j] - t.accel[j]).norm() < 1e-7);
        }
        assert_eq!(back.to_csv(), t.to_csv());
    }

    #[test]
    fn scaled_round_trip() {
        let s = Scaling {
            length: 100.0,
            time: 7.0,
            velocity: 100.0 / 7.0,
            accel: 1.625,
            alpha: 1e-3,
            origin: Vector3::new(1.0, -1.0, 0.0),
        };
        let t = sample();
        let back = Trajectory::from_scaled(&t.to_scaled(&s), &s, Hold::Zero);
        for j in 0..t.nodes() {
            assert!((back.position[j] - t.position[j]).norm() < 1e-12);
            assert!((back.slack[j] - t.slack[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn command_is_zero_after_final_time() {
        let t = sample();
        assert_eq!(t.thrust_command(8.0), Vector3::zeros());
        assert!(t.thrust_command(7.9).norm() > 0.0);
    }

    #[test]
    fn resample_keeps_endpoints() {
        let t = sample();
        let r = t.resample_from(2.0, 7);
        assert!((r.final_time - 6.0).abs() < 1e-12);
        assert!((r.position[0] - t.position_at(2.0)).norm() < 1e-12);
        assert!((r.position[6] - t.position[4]).norm() < 1e-12);
    }
}
