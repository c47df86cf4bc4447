use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::failure::{sample_failures, FailureEvent, FailureMode, FailureModel};
use super::perturb::{PerturbationDraw, PerturbationScales, StepNoise};
use super::truth::{engine_output, rk4_step, Actuation, Slosh, TruthState};
use super::SimError;
use crate::guidance::{fmt_sig, Trajectory, TRAJECTORY_COLUMNS};
use crate::model::{EnvironmentSpec, VehicleSpec};

/// Truth integration step, s.
pub const SIM_DT: f64 = 0.1;

/// Everything random about one flight. Per-run constants and failures come
/// from stream 0 of the seed, per-step noise from stream 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSetup {
    pub seed: u64,
    pub draw: PerturbationDraw,
    pub failures: Vec<FailureEvent>,
    /// Frequency of an activated slosh mode.
    pub slosh_frequency_hz: f64,
}

impl RunSetup {
    pub fn sample(
        seed: u64,
        scales: &PerturbationScales,
        failures: &FailureModel,
        flight_window_s: f64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = PerturbationDraw::sample(scales, &mut rng);
        let events = sample_failures(failures, flight_window_s, &mut rng);
        Self {
            seed,
            draw,
            failures: events,
            slosh_frequency_hz: failures.slosh_frequency_hz,
        }
    }

    pub fn nominal() -> Self {
        Self {
            seed: 0,
            draw: PerturbationDraw::nominal(),
            failures: Vec::new(),
            slosh_frequency_hz: FailureModel::default().slosh_frequency_hz,
        }
    }

    fn noise_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(1);
        rng
    }

    /// Truth initial state for a plan starting at `r0, v0, m0`.
    pub fn initial_state(&self, r0: Vector3<f64>, v0: Vector3<f64>, m0: f64) -> TruthState {
        TruthState {
            t: 0.0,
            r: r0 + self.draw.dr0,
            v: v0 + self.draw.dv0,
            m: m0 * (1.0 + self.draw.dm0_frac),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightSample {
    pub t: f64,
    pub r: Vector3<f64>,
    pub v: Vector3<f64>,
    pub m: f64,
    pub commanded: Vector3<f64>,
    pub actual: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Touchdown {
    pub time_s: f64,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub mass_kg: f64,
    pub miss_distance_m: f64,
    pub vertical_speed_mps: f64,
    pub lateral_speed_mps: f64,
    pub propellant_used_kg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightRecord {
    pub seed: u64,
    pub samples: Vec<FlightSample>,
    pub touchdown: Touchdown,
}

pub const FLIGHT_EXTRA_COLUMNS: [&str; 4] =
    ["Tx_actual", "Ty_actual", "Tz_actual", "thrust_mag_actual"];

impl FlightRecord {
    /// One row per truth step plus the touchdown row. `T*` columns hold the
    /// command, `*_actual` the engine output.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = TRAJECTORY_COLUMNS
            .iter()
            .chain(FLIGHT_EXTRA_COLUMNS.iter())
            .copied()
            .collect();
        w.write_record(&header).expect("in-memory write");
        for s in &self.samples {
            let c = s.commanded;
            let tilt = if c.norm() > 0.0 {
                (c.z / c.norm()).clamp(-1.0, 1.0).acos().to_degrees()
            } else {
                0.0
            };
            let row = [
                s.t,
                s.r.x,
                s.r.y,
                s.r.z,
                s.v.x,
                s.v.y,
                s.v.z,
                s.m,
                c.x,
                c.y,
                c.z,
                c.norm(),
                tilt,
                s.actual.x,
                s.actual.y,
                s.actual.z,
                s.actual.norm(),
            ];
            w.write_record(row.iter().map(|&x| fmt_sig(x)))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii csv")
    }
}

/// Stateful truth simulation of one flight.
pub struct FlightSim<'a> {
    vehicle: &'a VehicleSpec,
    env: &'a EnvironmentSpec,
    setup: &'a RunSetup,
    noise: ChaCha8Rng,
    state: TruthState,
    initial_mass: f64,
    target: Vector3<f64>,
    samples: Vec<FlightSample>,
    held: Vec<Option<Vector3<f64>>>,
    /// Jitter rotation locked by a seized gimbal, `(azimuth rad, angle deg)`.
    frozen: Option<(f64, f64)>,
    touchdown: Option<Touchdown>,
}

impl<'a> FlightSim<'a> {
    pub fn new(
        initial: TruthState,
        target: Vector3<f64>,
        setup: &'a RunSetup,
        vehicle: &'a VehicleSpec,
        env: &'a EnvironmentSpec,
    ) -> Self {
        Self {
            vehicle,
            env,
            setup,
            noise: setup.noise_rng(),
            state: initial,
            initial_mass: initial.m,
            target,
            samples: Vec::new(),
            held: vec![None; setup.failures.len()],
            frozen: None,
            touchdown: None,
        }
    }

    pub fn state(&self) -> &TruthState {
        &self.state
    }

    pub fn altitude(&self) -> f64 {
        self.state.r.z - self.target.z
    }

    pub fn touchdown(&self) -> Option<&Touchdown> {
        self.touchdown.as_ref()
    }

    fn actuation(&mut self, noise: &StepNoise, t: f64) -> Actuation {
        let d = &self.setup.draw;
        let mut act = Actuation {
            thrust_factor: (1.0 + d.thrust_bias_frac) * (1.0 + noise.thrust_frac),
            degradation: 1.0,
            pointing: [
                (d.pointing_bias_azimuth, d.pointing_bias_deg),
                (noise.jitter_azimuth, noise.jitter_deg),
            ],
            gravity: self.env.gravity_moon * (1.0 + d.gravity_err_frac),
            isp: self.vehicle.engine.isp * (1.0 + d.isp_err_frac),
            leak_rate: 0.0,
            accel: noise.accel,
            slosh: None,
        };
        let setup = self.setup;
        for e in setup.failures.iter().filter(|e| e.onset_s <= t) {
            let lateral = Vector3::new(e.azimuth.cos(), e.azimuth.sin(), 0.0);
            match e.mode {
                FailureMode::EngineShutoff => act.degradation = 0.0,
                FailureMode::ThrustDegradation => act.degradation *= e.severity,
                FailureMode::PropellantLeak => act.leak_rate += e.severity,
                FailureMode::RcsStuck => act.accel += lateral * e.severity,
                FailureMode::Slosh => {
                    act.slosh = Some(Slosh {
                        amplitude: e.severity,
                        frequency_hz: self.setup.slosh_frequency_hz,
                        direction: lateral,
                    })
                }
                FailureMode::NozzleErosion => act.isp *= 1.0 - e.severity,
                FailureMode::GimbalSeizure => {
                    act.pointing[1] = *self.frozen.get_or_insert(act.pointing[1]);
                }
                FailureMode::PowerBrownout
                | FailureMode::SensorFailure
                | FailureMode::ComputerReset => {}
            }
        }
        act
    }

    /// Command after any active command-hold failure.
    fn held_command(
        &mut self,
        t: f64,
        command: &dyn Fn(f64) -> Vector3<f64>,
    ) -> Option<Vector3<f64>> {
        let mut hold = None;
        for (i, e) in self.setup.failures.iter().enumerate() {
            if !e.mode.holds_command() || t < e.onset_s {
                continue;
            }
            if t < e.onset_s + e.severity {
                let value = *self.held[i].get_or_insert_with(|| command(t));
                hold = Some(value);
            }
        }
        hold
    }

    /// Advance one truth step, split at any command breakpoint inside it.
    pub fn step(
        &mut self,
        command: &dyn Fn(f64) -> Vector3<f64>,
        breakpoints: &[f64],
    ) -> Result<(), SimError> {
        if self.touchdown.is_some() {
            return Ok(());
        }
        let t0 = self.state.t;
        let noise = StepNoise::sample(&self.setup.draw, &mut self.noise);
        let hold = self.held_command(t0, command);
        let effective = |t: f64| hold.unwrap_or_else(|| command(t));
        let act = self.actuation(&noise, t0);
        let commanded = effective(t0);
        let actual = if self.state.m > self.vehicle.mass_dry {
            engine_output(&commanded, &self.vehicle.engine, &act)
        } else {
            Vector3::zeros()
        };
        self.samples.push(FlightSample {
            t: t0,
            r: self.state.r,
            v: self.state.v,
            m: self.state.m,
            commanded,
            actual,
        });

        let t1 = t0 + SIM_DT;
        let mut cuts: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|&b| b > t0 + 1e-9 && b < t1 - 1e-9)
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.push(t1);
        let before = self.state;
        let mut s = self.state;
        for &cut in &cuts {
            s = rk4_step(&s, &effective, &act, cut - s.t, self.vehicle, self.env)?;
        }
        s.t = t1;
        self.state = s;

        let (h0, h1) = (before.r.z - self.target.z, s.r.z - self.target.z);
        if h0 > 0.0 && h1 <= 0.0 {
            let f = h0 / (h0 - h1);
            let lerp = |a: f64, b: f64| a + (b - a) * f;
            let position = before.r.lerp(&s.r, f);
            let velocity = before.v.lerp(&s.v, f);
            let mass = lerp(before.m, s.m);
            let touchdown = Touchdown {
                time_s: lerp(t0, t1),
                position,
                velocity,
                mass_kg: mass,
                miss_distance_m: (position - self.target).xy().norm(),
                vertical_speed_mps: -velocity.z,
                lateral_speed_mps: velocity.xy().norm(),
                propellant_used_kg: self.initial_mass - mass,
            };
            self.samples.push(FlightSample {
                t: touchdown.time_s,
                r: position,
                v: velocity,
                m: mass,
                commanded: effective(touchdown.time_s),
                actual: engine_output(&effective(touchdown.time_s), &self.vehicle.engine, &act),
            });
            self.touchdown = Some(touchdown);
        }
        Ok(())
    }

    pub fn finish(self) -> Result<FlightRecord, SimError> {
        match self.touchdown {
            Some(touchdown) => Ok(FlightRecord {
                seed: self.setup.seed,
                samples: self.samples,
                touchdown,
            }),
            None => Err(SimError::Timeout { t: self.state.t }),
        }
    }
}

/// Fly a plan without replanning. Commands follow the plan's thrust profile
/// and stop at its final time.
pub fn run_open_loop(
    traj: &Trajectory,
    setup: &RunSetup,
    vehicle: &VehicleSpec,
    env: &EnvironmentSpec,
) -> Result<FlightRecord, SimError> {
    let n = traj.nodes();
    let initial = setup.initial_state(traj.position[0], traj.velocity[0], traj.mass(0));
    let mut sim = FlightSim::new(initial, traj.position[n - 1], setup, vehicle, env);
    let breakpoints = traj.times();
    let command = |t: f64| traj.thrust_command(t);
    let horizon = 2.0 * traj.final_time;
    while sim.touchdown().is_none() {
        if sim.state().t > horizon {
            return Err(SimError::Timeout { t: sim.state().t });
        }
        sim.step(&command, &breakpoints)?;
    }
    sim.finish()
}
