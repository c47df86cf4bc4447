//! Vehicle, engine and environment parameters plus the closed-form design
//! formulas used for lander sizing (tip-over stability, delta-v budget,
//! tilt feasibility boundary, mass flow).
//!
//! Angles cross the public API in degrees; trigonometry is done in radians.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by the parameter model and the design formulas.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

fn domain(msg: impl Into<String>) -> ModelError {
    ModelError::Domain(msg.into())
}

fn config(msg: impl Into<String>) -> ModelError {
    ModelError::Config(msg.into())
}

/// Gravitational environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    /// Surface gravity magnitude, m/s^2.
    #[serde(rename = "gravity_moon_mps2")]
    pub gravity_moon: f64,
    /// Standard gravity used to convert specific impulse, m/s^2.
    #[serde(rename = "g0_mps2")]
    pub g0: f64,
}

impl EnvironmentSpec {
    pub fn moon() -> Self {
        Self {
            gravity_moon: 1.625,
            g0: 9.81,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.gravity_moon > 0.0 && self.gravity_moon.is_finite()) {
            return Err(config("gravity_moon_mps2 must be positive"));
        }
        if !(self.g0 > 0.0 && self.g0.is_finite()) {
            return Err(config("g0_mps2 must be positive"));
        }
        Ok(())
    }
}

impl Default for EnvironmentSpec {
    fn default() -> Self {
        Self::moon()
    }
}

/// Throttleable main engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSpec {
    #[serde(rename = "thrust_min_newton")]
    pub thrust_min: f64,
    #[serde(rename = "thrust_max_newton")]
    pub thrust_max: f64,
    /// Nominal specific impulse used by guidance, s.
    #[serde(rename = "isp_s")]
    pub isp: f64,
    /// Commands below this level produce unreliable output, N.
    #[serde(rename = "dead_zone_newton")]
    pub dead_zone: f64,
    #[serde(rename = "gimbal_authority_deg")]
    pub gimbal_authority: f64,
    #[serde(rename = "thrust_error_1sigma_frac")]
    pub thrust_error_1sigma: f64,
    #[serde(rename = "pointing_error_1sigma_deg")]
    pub pointing_error_1sigma: f64,
}

impl EngineSpec {
    /// YUNT V0 bipropellant engine with the mid-range specific impulse.
    pub fn yunt_v0() -> Self {
        Self {
            thrust_min: 800.0,
            thrust_max: 5200.0,
            isp: 225.0,
            dead_zone: 600.0,
            gimbal_authority: 7.0,
            thrust_error_1sigma: 0.017,
            pointing_error_1sigma: 0.5,
        }
    }

    pub fn throttle_ratio(&self) -> f64 {
        self.thrust_max / self.thrust_min
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let ordered = 0.0 < self.dead_zone
            && self.dead_zone < self.thrust_min
            && self.thrust_min < self.thrust_max;
        if !ordered {
            return Err(config(
                "engine requires 0 < dead_zone < thrust_min < thrust_max",
            ));
        }
        if !(self.isp > 0.0 && self.isp.is_finite()) {
            return Err(config("isp_s must be positive"));
        }
        if self.thrust_error_1sigma < 0.0 || self.pointing_error_1sigma < 0.0 {
            return Err(config("engine error sigmas must be non-negative"));
        }
        Ok(())
    }
}

/// One row of the centre-of-mass / principal inertia table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassPropertyRow {
    /// Fraction of the propellant load still on board (wet = 1, dry = 0).
    pub propellant_fraction: f64,
    #[serde(rename = "cog_y_m")]
    pub cog_y: f64,
    #[serde(rename = "cog_z_m")]
    pub cog_z: f64,
    #[serde(rename = "jxx_kgm2")]
    pub jxx: f64,
    #[serde(rename = "jyy_kgm2")]
    pub jyy: f64,
    #[serde(rename = "jzz_kgm2")]
    pub jzz: f64,
}

impl MassPropertyRow {
    fn lerp(&self, other: &Self, w: f64) -> Self {
        let mix = |a: f64, b: f64| a + (b - a) * w;
        Self {
            propellant_fraction: mix(self.propellant_fraction, other.propellant_fraction),
            cog_y: mix(self.cog_y, other.cog_y),
            cog_z: mix(self.cog_z, other.cog_z),
            jxx: mix(self.jxx, other.jxx),
            jyy: mix(self.jyy, other.jyy),
            jzz: mix(self.jzz, other.jzz),
        }
    }
}

/// Propellant fraction remaining at the "mid (20 s)" table row.
///
/// The table is indexed by burn time; the row is placed by the fraction of the
/// propellant load remaining 20 s into the shipped reference descent plan
/// (259.5 kg wet, 800 N for the first 20 s).
pub const BUG_MID_ROW_PROPELLANT_FRACTION: f64 = 0.9152;

/// Mass properties keyed by propellant fraction remaining, strictly decreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassPropertyTable {
    pub rows: Vec<MassPropertyRow>,
}

impl MassPropertyTable {
    /// BUG lander wet / mid-burn / dry mass properties.
    pub fn bug() -> Self {
        let row = |f, cy, cz, jxx, jyy, jzz| MassPropertyRow {
            propellant_fraction: f,
            cog_y: cy,
            cog_z: cz,
            jxx,
            jyy,
            jzz,
        };
        Self {
            rows: vec![
                row(1.0, 1.47, 0.01, 140.2, 96.3, 140.1),
                row(
                    BUG_MID_ROW_PROPELLANT_FRACTION,
                    1.45,
                    0.00,
                    136.7,
                    93.6,
                    136.5,
                ),
                row(0.0, 1.38, -0.01, 126.1, 86.5, 126.0),
            ],
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.rows.is_empty() {
            return Err(config("mass property table is empty"));
        }
        for pair in self.rows.windows(2) {
            if pair[1].propellant_fraction >= pair[0].propellant_fraction {
                return Err(config(
                    "mass property rows must have strictly decreasing propellant fraction",
                ));
            }
        }
        for r in &self.rows {
            if !(r.jxx > 0.0 && r.jyy > 0.0 && r.jzz > 0.0) {
                return Err(config("principal inertias must be positive"));
            }
        }
        Ok(())
    }

    /// Piecewise-linear interpolation in propellant fraction; clamps outside
    /// the tabulated range.
    pub fn at(&self, propellant_fraction: f64) -> Result<MassPropertyRow, ModelError> {
        mass_properties_at(self, propellant_fraction)
    }
}

/// Lander geometry, masses and engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSpec {
    #[serde(rename = "mass_wet_kg")]
    pub mass_wet: f64,
    #[serde(rename = "mass_dry_kg")]
    pub mass_dry: f64,
    #[serde(rename = "height_m")]
    pub height: f64,
    #[serde(rename = "footprint_diameter_m")]
    pub footprint_diameter: f64,
    #[serde(rename = "cog_height_m")]
    pub cog_height: f64,
    pub engine: EngineSpec,
    #[serde(default = "MassPropertyTable::bug")]
    pub mass_properties: MassPropertyTable,
}

impl VehicleSpec {
    /// The BUG VTVL test lander with the YUNT V0 engine.
    pub fn bug() -> Self {
        Self {
            mass_wet: 259.5,
            mass_dry: 174.0,
            height: 2.26,
            footprint_diameter: 3.77,
            cog_height: 1.47,
            engine: EngineSpec::yunt_v0(),
            mass_properties: MassPropertyTable::bug(),
        }
    }

    pub fn propellant_mass(&self) -> f64 {
        self.mass_wet - self.mass_dry
    }

    pub fn thrust_to_weight(&self, env: &EnvironmentSpec) -> f64 {
        self.engine.thrust_max / (self.mass_wet * env.g0)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.mass_dry > 0.0 && self.mass_dry < self.mass_wet) {
            return Err(config("vehicle requires 0 < mass_dry < mass_wet"));
        }
        if !(self.footprint_diameter > 0.0) {
            return Err(config("footprint diameter must be positive"));
        }
        if !(self.cog_height > 0.0 && self.cog_height < self.height) {
            return Err(config("vehicle requires 0 < cog_height < height"));
        }
        self.engine.validate()?;
        self.mass_properties.validate()
    }
}

impl Default for VehicleSpec {
    fn default() -> Self {
        Self::bug()
    }
}

/// Static tip-over angle of a lander, degrees: `atan((D/2) / h)`.
pub fn tip_over_angle(footprint_diameter: f64, cog_height: f64) -> Result<f64, ModelError> {
    if !(footprint_diameter > 0.0) || !(cog_height > 0.0) {
        return Err(domain(
            "tip-over angle needs positive diameter and CoG height",
        ));
    }
    Ok((0.5 * footprint_diameter / cog_height).atan().to_degrees())
}

/// Ideal rocket-equation velocity budget, m/s.
pub fn delta_v_budget(
    isp: f64,
    g0: f64,
    mass_initial: f64,
    mass_final: f64,
) -> Result<f64, ModelError> {
    if !(mass_final > 0.0) || mass_initial < mass_final {
        return Err(domain(
            "delta-v budget needs mass_initial >= mass_final > 0",
        ));
    }
    if !(isp > 0.0 && g0 > 0.0) {
        return Err(domain("delta-v budget needs positive isp and g0"));
    }
    Ok(isp * g0 * (mass_initial / mass_final).ln())
}

/// Result of the tilt feasibility analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "deg", rename_all = "snake_case")]
pub enum TiltBoundary {
    /// Tilt at which the vertical component of minimum thrust equals the weight.
    Angle(f64),
    /// Minimum thrust is below the weight: descent is possible at any tilt.
    NoBoundary,
}

impl TiltBoundary {
    pub fn degrees(&self) -> Option<f64> {
        match self {
            TiltBoundary::Angle(a) => Some(*a),
            TiltBoundary::NoBoundary => None,
        }
    }
}

/// Critical tilt angle `acos(m g / rho_min)`.
///
/// Below this tilt the vertical component of minimum thrust exceeds the
/// weight, so continuous-thrust descent cannot accelerate downward.
pub fn critical_tilt_angle(
    mass: f64,
    gravity: f64,
    thrust_min: f64,
) -> Result<TiltBoundary, ModelError> {
    if !(mass > 0.0 && gravity > 0.0 && thrust_min > 0.0) {
        return Err(domain(
            "critical tilt needs positive mass, gravity and thrust",
        ));
    }
    let ratio = mass * gravity / thrust_min;
    if ratio > 1.0 {
        return Ok(TiltBoundary::NoBoundary);
    }
    Ok(TiltBoundary::Angle(ratio.acos().to_degrees()))
}

/// Propellant mass flow for a thrust magnitude, kg/s.
pub fn mass_flow_rate(thrust_magnitude: f64, isp: f64, g0: f64) -> Result<f64, ModelError> {
    if thrust_magnitude < 0.0 || !thrust_magnitude.is_finite() {
        return Err(domain("thrust magnitude must be non-negative"));
    }
    if !(isp > 0.0 && g0 > 0.0) {
        return Err(domain("mass flow needs positive isp and g0"));
    }
    Ok(thrust_magnitude / (isp * g0))
}

/// Interpolated mass properties at a propellant fraction in [0, 1].
pub fn mass_properties_at(
    table: &MassPropertyTable,
    propellant_fraction: f64,
) -> Result<MassPropertyRow, ModelError> {
    if table.rows.is_empty() {
        return Err(config("mass property table is empty"));
    }
    if !(0.0..=1.0).contains(&propellant_fraction) {
        return Err(domain("propellant fraction must lie in [0, 1]"));
    }
    let rows = &table.rows;
    let first = rows[0];
    let last = rows[rows.len() - 1];
    if propellant_fraction >= first.propellant_fraction {
        return Ok(MassPropertyRow {
            propellant_fraction,
            ..first
        });
    }
    if propellant_fraction <= last.propellant_fraction {
        return Ok(MassPropertyRow {
            propellant_fraction,
            ..last
        });
    }
    for pair in rows.windows(2) {
        let (hi, lo) = (pair[0], pair[1]);
        if propellant_fraction <= hi.propellant_fraction
            && propellant_fraction >= lo.propellant_fraction
        {
            let w = (hi.propellant_fraction - propellant_fraction)
                / (hi.propellant_fraction - lo.propellant_fraction);
            return Ok(hi.lerp(&lo, w));
        }
    }
    unreachable!("fraction bracketed by validated table")
}

/// Vehicle and environment bundled as one configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct VehicleConfig {
    #[serde(default)]
    pub vehicle: VehicleSpec,
    #[serde(default)]
    pub environment: EnvironmentSpec,
}

impl VehicleConfig {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| config(e.to_string()))?;
        cfg.vehicle.validate()?;
        cfg.environment.validate()?;
        Ok(cfg)
    }
}
