use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::executive::{run_closed_loop, ClosedLoopParams, ReplanEvent};
use super::stats::Distribution;
use super::CampaignError;
use crate::guidance::{fmt_sig, scvx_solve, DescentScenario, ScvxParams, Trajectory};
use crate::model::{EnvironmentSpec, VehicleSpec};
use crate::sim::{
    run_open_loop, FailureEvent, FailureModel, PerturbationDraw, PerturbationScales, RunSetup,
    Touchdown,
};

/// Version of the summary and record layouts.
pub const SCHEMA_VERSION: u32 = 1;

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `index`. Depends only on the pair, so adding runs never
/// changes earlier ones.
pub fn run_seed(base_seed: u64, index: u64) -> u64 {
    splitmix64(base_seed ^ splitmix64(index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlightMode {
    OpenLoop,
    ClosedLoop,
}

impl FlightMode {
    pub fn name(self) -> &'static str {
        match self {
            FlightMode::OpenLoop => "open_loop",
            FlightMode::ClosedLoop => "closed_loop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuccessCriteria {
    pub max_miss_m: f64,
    pub max_vertical_speed_mps: f64,
}

impl Default for SuccessCriteria {
    fn default() -> Self {
        Self {
            max_miss_m: 50.0,
            max_vertical_speed_mps: 2.5,
        }
    }
}

impl SuccessCriteria {
    pub fn met_by(&self, td: &Touchdown) -> bool {
        td.miss_distance_m < self.max_miss_m && td.vertical_speed_mps < self.max_vertical_speed_mps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub runs: usize,
    pub base_seed: u64,
    /// Fly open and closed loop on every draw.
    pub paired: bool,
    /// Mode flown when not paired.
    pub mode: FlightMode,
    pub closed_loop: ClosedLoopParams,
    pub scenario: DescentScenario,
    pub vehicle: VehicleSpec,
    pub environment: EnvironmentSpec,
    pub perturbations: PerturbationScales,
    pub failures: FailureModel,
    pub success: SuccessCriteria,
    pub scvx: ScvxParams,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            runs: 100,
            base_seed: 0,
            paired: false,
            mode: FlightMode::ClosedLoop,
            closed_loop: ClosedLoopParams::default(),
            scenario: DescentScenario::reference(),
            vehicle: VehicleSpec::bug(),
            environment: EnvironmentSpec::moon(),
            perturbations: PerturbationScales::table(),
            failures: FailureModel::default(),
            success: SuccessCriteria::default(),
            scvx: ScvxParams::default(),
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<(), CampaignError> {
        if self.runs == 0 {
            return Err(CampaignError::Config("runs must be at least 1".into()));
        }
        let s = &self.success;
        if !(s.max_miss_m > 0.0 && s.max_vertical_speed_mps > 0.0) {
            return Err(CampaignError::Config(
                "success thresholds must be positive".into(),
            ));
        }
        self.closed_loop.validate()?;
        self.vehicle.validate()?;
        self.environment.validate()?;
        self.scenario.validate(&self.vehicle)?;
        self.scvx.validate()?;
        self.perturbations.validate()?;
        self.failures.validate()?;
        Ok(())
    }

    pub fn modes(&self) -> Vec<FlightMode> {
        if self.paired {
            vec![FlightMode::OpenLoop, FlightMode::ClosedLoop]
        } else {
            vec![self.mode]
        }
    }
}

/// One flight of a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRecord {
    pub run_index: usize,
    pub seed: u64,
    pub mode: FlightMode,
    pub draw: PerturbationDraw,
    pub failures: Vec<FailureEvent>,
    /// `None` when the flight faulted or timed out.
    pub touchdown: Option<Touchdown>,
    pub fault: Option<String>,
    pub replans: Vec<ReplanEvent>,
    pub success: bool,
}

impl CampaignRecord {
    pub fn completed(&self) -> bool {
        self.touchdown.is_some()
    }

    pub fn replans_converged(&self) -> usize {
        self.replans.iter().filter(|r| r.converged()).count()
    }

    pub fn fallbacks(&self) -> usize {
        self.replans.iter().filter(|r| r.fallback).count()
    }

    pub fn to_row(&self) -> RecordRow {
        let td = self.touchdown.as_ref();
        let d = &self.draw;
        RecordRow {
            run_index: self.run_index,
            seed: self.seed,
            mode: self.mode,
            completed: self.completed(),
            success: self.success,
            miss_distance_m: td.map(|t| t.miss_distance_m),
            vertical_speed_mps: td.map(|t| t.vertical_speed_mps),
            lateral_speed_mps: td.map(|t| t.lateral_speed_mps),
            touchdown_speed_mps: td.map(|t| t.velocity.norm()),
            propellant_kg: td.map(|t| t.propellant_used_kg),
            touchdown_time_s: td.map(|t| t.time_s),
            replan_count: self.replans.len(),
            replans_converged: self.replans_converged(),
            replan_fallbacks: self.fallbacks(),
            replan_converged_flags: self
                .replans
                .iter()
                .map(|r| if r.converged() { '1' } else { '0' })
                .collect(),
            failures: self
                .failures
                .iter()
                .map(|e| format!("{}@{}", e.mode.name(), fmt_sig(e.onset_s)))
                .collect::<Vec<_>>()
                .join(";"),
            fault: self.fault.clone().unwrap_or_default(),
            dr0_x_m: d.dr0.x,
            dr0_y_m: d.dr0.y,
            dr0_z_m: d.dr0.z,
            dv0_x_mps: d.dv0.x,
            dv0_y_mps: d.dv0.y,
            dv0_z_mps: d.dv0.z,
            dm0_frac: d.dm0_frac,
            thrust_bias_frac: d.thrust_bias_frac,
            pointing_bias_deg: d.pointing_bias_deg,
            gravity_err_frac: d.gravity_err_frac,
            isp_err_frac: d.isp_err_frac,
        }
    }
}

/// Flat CSV form of a record. Empty numeric fields mean no touchdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub run_index: usize,
    pub seed: u64,
    pub mode: FlightMode,
    pub completed: bool,
    pub success: bool,
    pub miss_distance_m: Option<f64>,
    pub vertical_speed_mps: Option<f64>,
    pub lateral_speed_mps: Option<f64>,
    pub touchdown_speed_mps: Option<f64>,
    pub propellant_kg: Option<f64>,
    pub touchdown_time_s: Option<f64>,
    pub replan_count: usize,
    pub replans_converged: usize,
    pub replan_fallbacks: usize,
    /// One character per replan, `1` when it converged.
    pub replan_converged_flags: String,
    /// `mode@onset_s` entries separated by `;`.
    pub failures: String,
    pub fault: String,
    pub dr0_x_m: f64,
    pub dr0_y_m: f64,
    pub dr0_z_m: f64,
    pub dv0_x_mps: f64,
    pub dv0_y_mps: f64,
    pub dv0_z_mps: f64,
    pub dm0_frac: f64,
    pub thrust_bias_frac: f64,
    pub pointing_bias_deg: f64,
    pub gravity_err_frac: f64,
    pub isp_err_frac: f64,
}

pub const RECORD_COLUMNS: [&str; 28] = [
    "run_index",
    "seed",
    "mode",
    "completed",
    "success",
    "miss_distance_m",
    "vertical_speed_mps",
    "lateral_speed_mps",
    "touchdown_speed_mps",
    "propellant_kg",
    "touchdown_time_s",
    "replan_count",
    "replans_converged",
    "replan_fallbacks",
    "replan_converged_flags",
    "failures",
    "fault",
    "dr0_x_m",
    "dr0_y_m",
    "dr0_z_m",
    "dv0_x_mps",
    "dv0_y_mps",
    "dv0_z_mps",
    "dm0_frac",
    "thrust_bias_frac",
    "pointing_bias_deg",
    "gravity_err_frac",
    "isp_err_frac",
];

impl RecordRow {
    fn fields(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map(fmt_sig).unwrap_or_default();
        let mut out = vec![
            self.run_index.to_string(),
            self.seed.to_string(),
            self.mode.name().to_string(),
            self.completed.to_string(),
            self.success.to_string(),
        ];
        out.extend(
            [
                self.miss_distance_m,
                self.vertical_speed_mps,
                self.lateral_speed_mps,
                self.touchdown_speed_mps,
                self.propellant_kg,
                self.touchdown_time_s,
            ]
            .map(opt),
        );
        out.extend([
            self.replan_count.to_string(),
            self.replans_converged.to_string(),
            self.replan_fallbacks.to_string(),
            self.replan_converged_flags.clone(),
            self.failures.clone(),
            self.fault.clone(),
        ]);
        out.extend(
            [
                self.dr0_x_m,
                self.dr0_y_m,
                self.dr0_z_m,
                self.dv0_x_mps,
                self.dv0_y_mps,
                self.dv0_z_mps,
                self.dm0_frac,
                self.thrust_bias_frac,
                self.pointing_bias_deg,
                self.gravity_err_frac,
                self.isp_err_frac,
            ]
            .map(fmt_sig),
        );
        out
    }
}

/// Records as CSV, one row per flight, reals at 9 significant digits.
pub fn records_to_csv(records: &[CampaignRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RECORD_COLUMNS).expect("in-memory write");
    for r in records {
        w.write_record(r.to_row().fields())
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

pub fn records_from_csv(text: &str) -> Result<Vec<RecordRow>, CampaignError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| CampaignError::Config(format!("bad record CSV: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: FlightMode,
    pub runs: usize,
    pub completed: usize,
    pub successes: usize,
    /// Successes over all runs; faulted runs count as failures.
    pub success_rate: f64,
    pub miss_distance_m: Option<Distribution>,
    pub vertical_speed_mps: Option<Distribution>,
    pub mean_propellant_kg: Option<f64>,
    pub replans: usize,
    pub replans_converged: usize,
    pub replan_fallbacks: usize,
}

impl ModeSummary {
    fn of(mode: FlightMode, records: &[&CampaignRecord]) -> Self {
        let touchdowns: Vec<&Touchdown> = records
            .iter()
            .filter_map(|r| r.touchdown.as_ref())
            .collect();
        let collect =
            |f: fn(&Touchdown) -> f64| touchdowns.iter().map(|t| f(t)).collect::<Vec<_>>();
        let successes = records.iter().filter(|r| r.success).count();
        let propellant = collect(|t| t.propellant_used_kg);
        Self {
            mode,
            runs: records.len(),
            completed: touchdowns.len(),
            successes,
            success_rate: successes as f64 / records.len().max(1) as f64,
            miss_distance_m: Distribution::of(&collect(|t| t.miss_distance_m)),
            vertical_speed_mps: Distribution::of(&collect(|t| t.vertical_speed_mps)),
            mean_propellant_kg: Distribution::of(&propellant).map(|d| d.mean),
            replans: records.iter().map(|r| r.replans.len()).sum(),
            replans_converged: records.iter().map(|r| r.replans_converged()).sum(),
            replan_fallbacks: records.iter().map(|r| r.fallbacks()).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NominalSummary {
    pub iterations: usize,
    pub final_time_s: f64,
    pub propellant_kg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub schema_version: u32,
    pub version: String,
    pub config: CampaignConfig,
    pub nominal: NominalSummary,
    pub modes: Vec<ModeSummary>,
    /// Completed flights over all flights.
    pub completed_fraction: f64,
    /// Mean closed-loop miss over mean open-loop miss, paired campaigns only.
    pub paired_miss_ratio: Option<f64>,
}

impl CampaignSummary {
    pub fn mode(&self, mode: FlightMode) -> Option<&ModeSummary> {
        self.modes.iter().find(|m| m.mode == mode)
    }
}

#[derive(Debug, Clone)]
pub struct CampaignOutput {
    pub nominal: Trajectory,
    pub records: Vec<CampaignRecord>,
    pub summary: CampaignSummary,
}

/// Fly one draw in one mode. Faults are recorded, never propagated.
pub fn fly(
    config: &CampaignConfig,
    nominal: &Trajectory,
    run_index: usize,
    setup: &RunSetup,
    mode: FlightMode,
) -> CampaignRecord {
    let (v, e) = (&config.vehicle, &config.environment);
    let (touchdown, fault, replans) = match mode {
        FlightMode::OpenLoop => match run_open_loop(nominal, setup, v, e) {
            Ok(rec) => (Some(rec.touchdown), None, Vec::new()),
            Err(err) => (None, Some(err.to_string()), Vec::new()),
        },
        FlightMode::ClosedLoop => {
            match run_closed_loop(
                &config.scenario,
                nominal,
                setup,
                v,
                e,
                &config.scvx,
                &config.closed_loop,
            ) {
                Ok(flight) => (Some(flight.record.touchdown), None, flight.replans),
                Err(f) => (None, Some(f.error.to_string()), f.replans),
            }
        }
    };
    CampaignRecord {
        run_index,
        seed: setup.seed,
        mode,
        draw: setup.draw,
        failures: setup.failures.clone(),
        success: touchdown.as_ref().is_some_and(|t| config.success.met_by(t)),
        touchdown,
        fault,
        replans,
    }
}

/// Solve the nominal plan the campaign flies from.
pub fn nominal_plan(
    config: &CampaignConfig,
) -> Result<(Trajectory, NominalSummary), CampaignError> {
    let out = scvx_solve(
        &config.scenario,
        &config.vehicle,
        &config.environment,
        &config.scvx,
    )?;
    if !out.report.converged() {
        return Err(CampaignError::NominalPlan(out.report.status));
    }
    let t = out.trajectory;
    let summary = NominalSummary {
        iterations: out.report.iterations,
        final_time_s: t.final_time,
        propellant_kg: t.mass(0) - t.mass(t.nodes() - 1),
    };
    Ok((t, summary))
}

/// Run every draw in every configured mode.
///
/// Runs execute in parallel; records come back ordered by run index and
/// mode, so the output does not depend on scheduling. Paired modes share
/// one draw per run.
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignOutput, CampaignError> {
    config.validate()?;
    let (nominal, nominal_summary) = nominal_plan(config)?;
    let modes = config.modes();
    let per_run: Vec<Vec<CampaignRecord>> = (0..config.runs)
        .into_par_iter()
        .map(|i| {
            let setup = RunSetup::sample(
                run_seed(config.base_seed, i as u64),
                &config.perturbations,
                &config.failures,
                nominal.final_time,
            );
            modes
                .iter()
                .map(|&m| fly(config, &nominal, i, &setup, m))
                .collect()
        })
        .collect();
    let records: Vec<CampaignRecord> = per_run.into_iter().flatten().collect();
    let summary = summarize(config, nominal_summary, &records);
    Ok(CampaignOutput {
        nominal,
        records,
        summary,
    })
}

pub fn summarize(
    config: &CampaignConfig,
    nominal: NominalSummary,
    records: &[CampaignRecord],
) -> CampaignSummary {
    let modes: Vec<ModeSummary> = config
        .modes()
        .into_iter()
        .map(|m| {
            let subset: Vec<&CampaignRecord> = records.iter().filter(|r| r.mode == m).collect();
            ModeSummary::of(m, &subset)
        })
        .collect();
    let mean_miss = |m: FlightMode| {
        modes
            .iter()
            .find(|s| s.mode == m)
            .and_then(|s| s.miss_distance_m)
            .map(|d| d.mean)
    };
    let paired_miss_ratio = match (
        mean_miss(FlightMode::ClosedLoop),
        mean_miss(FlightMode::OpenLoop),
    ) {
        (Some(cl), Some(ol)) if config.paired && ol > 0.0 => Some(cl / ol),
        _ => None,
    };
    let completed = records.iter().filter(|r| r.completed()).count();
    CampaignSummary {
        schema_version: SCHEMA_VERSION,
        version: format!("pdg {}", env!("CARGO_PKG_VERSION")),
        config: config.clone(),
        nominal,
        modes,
        completed_fraction: completed as f64 / records.len().max(1) as f64,
        paired_miss_ratio,
    }
}
