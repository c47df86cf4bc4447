use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SimError;

/// One-sigma dispersion magnitudes. Per-run terms are drawn once per
/// flight, per-step terms once per integration step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationScales {
    pub position_m: f64,
    pub velocity_mps: f64,
    pub mass_frac: f64,
    pub thrust_bias_frac: f64,
    pub thrust_noise_frac: f64,
    pub pointing_bias_deg: f64,
    pub pointing_jitter_deg: f64,
    pub gravity_frac: f64,
    pub isp_frac: f64,
    pub process_accel_mps2: f64,
}

impl PerturbationScales {
    /// Monte Carlo dispersion table of the BUG campaign.
    pub fn table() -> Self {
        Self {
            position_m: 10.0,
            velocity_mps: 2.0,
            mass_frac: 0.01,
            thrust_bias_frac: 0.03,
            thrust_noise_frac: 0.01,
            pointing_bias_deg: 1.0,
            pointing_jitter_deg: 0.5,
            gravity_frac: 0.005,
            isp_frac: 0.02,
            process_accel_mps2: 0.05,
        }
    }

    pub fn zero() -> Self {
        Self {
            position_m: 0.0,
            velocity_mps: 0.0,
            mass_frac: 0.0,
            thrust_bias_frac: 0.0,
            thrust_noise_frac: 0.0,
            pointing_bias_deg: 0.0,
            pointing_jitter_deg: 0.0,
            gravity_frac: 0.0,
            isp_frac: 0.0,
            process_accel_mps2: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let all = [
            self.position_m,
            self.velocity_mps,
            self.mass_frac,
            self.thrust_bias_frac,
            self.thrust_noise_frac,
            self.pointing_bias_deg,
            self.pointing_jitter_deg,
            self.gravity_frac,
            self.isp_frac,
            self.process_accel_mps2,
        ];
        if all.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(SimError::Config(
                "perturbation scales must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

impl Default for PerturbationScales {
    fn default() -> Self {
        Self::table()
    }
}

/// Per-run perturbation constants plus the sigmas of the per-step terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationDraw {
    pub dr0: Vector3<f64>,
    pub dv0: Vector3<f64>,
    pub dm0_frac: f64,
    pub thrust_bias_frac: f64,
    /// Azimuth of the bias rotation axis in the plane normal to the thrust, rad.
    pub pointing_bias_azimuth: f64,
    pub pointing_bias_deg: f64,
    pub gravity_err_frac: f64,
    pub isp_err_frac: f64,
    pub thrust_noise_sigma: f64,
    pub pointing_jitter_sigma_deg: f64,
    pub process_accel_sigma: f64,
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

impl PerturbationDraw {
    /// Draw every per-run constant from `rng` in a fixed order.
    pub fn sample<R: Rng + ?Sized>(scales: &PerturbationScales, rng: &mut R) -> Self {
        let vec3 =
            |s: f64, rng: &mut R| Vector3::new(normal(rng) * s, normal(rng) * s, normal(rng) * s);
        let dr0 = vec3(scales.position_m, rng);
        let dv0 = vec3(scales.velocity_mps, rng);
        Self {
            dr0,
            dv0,
            dm0_frac: normal(rng) * scales.mass_frac,
            thrust_bias_frac: normal(rng) * scales.thrust_bias_frac,
            pointing_bias_azimuth: rng.gen_range(0.0..std::f64::consts::TAU),
            pointing_bias_deg: normal(rng) * scales.pointing_bias_deg,
            gravity_err_frac: normal(rng) * scales.gravity_frac,
            isp_err_frac: normal(rng) * scales.isp_frac,
            thrust_noise_sigma: scales.thrust_noise_frac,
            pointing_jitter_sigma_deg: scales.pointing_jitter_deg,
            process_accel_sigma: scales.process_accel_mps2,
        }
    }

    /// The unperturbed draw.
    pub fn nominal() -> Self {
        Self {
            dr0: Vector3::zeros(),
            dv0: Vector3::zeros(),
            dm0_frac: 0.0,
            thrust_bias_frac: 0.0,
            pointing_bias_azimuth: 0.0,
            pointing_bias_deg: 0.0,
            gravity_err_frac: 0.0,
            isp_err_frac: 0.0,
            thrust_noise_sigma: 0.0,
            pointing_jitter_sigma_deg: 0.0,
            process_accel_sigma: 0.0,
        }
    }
}

/// Per-step noise terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepNoise {
    pub thrust_frac: f64,
    pub jitter_azimuth: f64,
    pub jitter_deg: f64,
    pub accel: Vector3<f64>,
}

impl StepNoise {
    /// Always consumes the same number of variates so paired runs see the
    /// same noise sequence.
    pub fn sample<R: Rng + ?Sized>(draw: &PerturbationDraw, rng: &mut R) -> Self {
        let thrust_frac = normal(rng) * draw.thrust_noise_sigma;
        let jitter_azimuth = rng.gen_range(0.0..std::f64::consts::TAU);
        let jitter_deg = normal(rng) * draw.pointing_jitter_sigma_deg;
        let s = draw.process_accel_sigma;
        let accel = Vector3::new(normal(rng) * s, normal(rng) * s, normal(rng) * s);
        Self {
            thrust_frac,
            jitter_azimuth,
            jitter_deg,
            accel,
        }
    }
}
