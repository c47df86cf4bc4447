use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureMode {
    EngineShutoff,
    ThrustDegradation,
    PowerBrownout,
    SensorFailure,
    RcsStuck,
    PropellantLeak,
    GimbalSeizure,
    ComputerReset,
    Slosh,
    NozzleErosion,
}

impl FailureMode {
    pub const ALL: [FailureMode; 10] = [
        FailureMode::EngineShutoff,
        FailureMode::ThrustDegradation,
        FailureMode::PowerBrownout,
        FailureMode::SensorFailure,
        FailureMode::RcsStuck,
        FailureMode::PropellantLeak,
        FailureMode::GimbalSeizure,
        FailureMode::ComputerReset,
        FailureMode::Slosh,
        FailureMode::NozzleErosion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FailureMode::EngineShutoff => "engine_shutoff",
            FailureMode::ThrustDegradation => "thrust_degradation",
            FailureMode::PowerBrownout => "power_brownout",
            FailureMode::SensorFailure => "sensor_failure",
            FailureMode::RcsStuck => "rcs_stuck",
            FailureMode::PropellantLeak => "propellant_leak",
            FailureMode::GimbalSeizure => "gimbal_seizure",
            FailureMode::ComputerReset => "computer_reset",
            FailureMode::Slosh => "slosh",
            FailureMode::NozzleErosion => "nozzle_erosion",
        }
    }

    /// Modes that freeze the commanded thrust for a while.
    pub fn holds_command(self) -> bool {
        matches!(
            self,
            FailureMode::PowerBrownout | FailureMode::SensorFailure | FailureMode::ComputerReset
        )
    }
}

/// An activated failure. `severity` is mode-specific: thrust scale for
/// degradation, kg/s for a leak, seconds for command holds, m/s^2 for
/// lateral disturbances, Isp fraction lost for nozzle erosion, unused for
/// shutoff and gimbal seizure. `azimuth` orients lateral disturbances, rad.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureEvent {
    pub mode: FailureMode,
    pub onset_s: f64,
    pub severity: f64,
    pub azimuth: f64,
}

/// Activation probability and severity ranges of the failure modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FailureModel {
    pub enabled: bool,
    pub probability_per_mode: f64,
    pub degradation_scale: [f64; 2],
    pub leak_rate_kgps: [f64; 2],
    pub hold_duration_s: [f64; 2],
    pub rcs_accel_mps2: f64,
    pub slosh_accel_mps2: f64,
    pub slosh_frequency_hz: f64,
    pub nozzle_isp_loss_frac: f64,
}

impl Default for FailureModel {
    fn default() -> Self {
        Self {
            enabled: true,
            probability_per_mode: 0.0025,
            degradation_scale: [0.6, 0.9],
            leak_rate_kgps: [0.01, 0.05],
            hold_duration_s: [2.0, 5.0],
            rcs_accel_mps2: 0.02,
            slosh_accel_mps2: 0.03,
            slosh_frequency_hz: 0.5,
            nozzle_isp_loss_frac: 0.03,
        }
    }
}

impl FailureModel {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let range_ok = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        let ok = (0.0..=1.0).contains(&self.probability_per_mode)
            && range_ok(self.degradation_scale)
            && self.degradation_scale[0] >= 0.0
            && range_ok(self.leak_rate_kgps)
            && self.leak_rate_kgps[0] >= 0.0
            && range_ok(self.hold_duration_s)
            && self.hold_duration_s[0] >= 0.0
            && self.rcs_accel_mps2 >= 0.0
            && self.slosh_accel_mps2 >= 0.0
            && self.slosh_frequency_hz >= 0.0
            && (0.0..1.0).contains(&self.nozzle_isp_loss_frac);
        if ok {
            Ok(())
        } else {
            Err(SimError::Config("invalid failure model".into()))
        }
    }
}

/// Activate each mode independently with onset uniform over
/// `[0, flight_window_s)`. Every mode consumes the same variates whether or
/// not it fires, so the stream stays aligned across configurations.
pub fn sample_failures<R: Rng + ?Sized>(
    model: &FailureModel,
    flight_window_s: f64,
    rng: &mut R,
) -> Vec<FailureEvent> {
    let mut events = Vec::new();
    for mode in FailureMode::ALL {
        let fire = rng.gen::<f64>() < model.probability_per_mode;
        let onset_s = rng.gen::<f64>() * flight_window_s;
        let u = rng.gen::<f64>();
        let azimuth = rng.gen::<f64>() * std::f64::consts::TAU;
        if !(model.enabled && fire) {
            continue;
        }
        let lerp = |r: [f64; 2]| r[0] + (r[1] - r[0]) * u;
        let severity = match mode {
            FailureMode::EngineShutoff | FailureMode::GimbalSeizure => 0.0,
            FailureMode::ThrustDegradation => lerp(model.degradation_scale),
            FailureMode::PropellantLeak => lerp(model.leak_rate_kgps),
            FailureMode::PowerBrownout
            | FailureMode::SensorFailure
            | FailureMode::ComputerReset => lerp(model.hold_duration_s),
            FailureMode::RcsStuck => model.rcs_accel_mps2,
            FailureMode::Slosh => model.slosh_accel_mps2,
            FailureMode::NozzleErosion => model.nozzle_isp_loss_frac,
        };
        events.push(FailureEvent {
            mode,
            onset_s,
            severity,
            azimuth,
        });
    }
    events
}
