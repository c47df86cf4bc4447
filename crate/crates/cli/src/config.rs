use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use pdg_core::campaign::CampaignConfig;
use pdg_core::guidance::{DescentScenario, ScvxParams};
use pdg_core::model::{EnvironmentSpec, VehicleConfig, VehicleSpec};
use pdg_core::sim::{FailureModel, PerturbationScales};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::CliError;

/// Problem inputs shared by every command. Missing files fall back to the
/// built-in BUG vehicle and reference hop.
#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Vehicle and environment JSON.
    #[arg(long, value_name = "FILE")]
    pub vehicle: Option<PathBuf>,
    /// Descent scenario JSON.
    #[arg(long, value_name = "FILE")]
    pub scenario: Option<PathBuf>,
    /// SCvx parameter JSON.
    #[arg(long, value_name = "FILE")]
    pub scvx: Option<PathBuf>,
    /// Override the scenario tilt limit, degrees.
    #[arg(long, value_name = "DEG")]
    pub theta_max: Option<f64>,
}

/// Everything a guidance solve needs, validated.
#[derive(Debug, Clone)]
pub struct Problem {
    pub vehicle: VehicleSpec,
    pub environment: EnvironmentSpec,
    pub scenario: DescentScenario,
    pub scvx: ScvxParams,
}

/// Dispersion inputs for `sim` and `mc`.
#[derive(Debug, Clone, Args)]
pub struct CampaignArgs {
    /// Campaign JSON; its vehicle, scenario and SCvx sections yield to the
    /// dedicated flags.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Zero every dispersion and disable failures.
    #[arg(long)]
    pub zero_perturbations: bool,
    /// Disable failure modes.
    #[arg(long)]
    pub no_failures: bool,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable report");
    text.push('\n');
    text
}

impl ProblemArgs {
    fn apply(&self, cfg: &mut CampaignConfig) -> Result<(), CliError> {
        if let Some(p) = &self.vehicle {
            let v: VehicleConfig = read_json(p)?;
            cfg.vehicle = v.vehicle;
            cfg.environment = v.environment;
        }
        if let Some(p) = &self.scenario {
            cfg.scenario = read_json(p)?;
        }
        if let Some(p) = &self.scvx {
            cfg.scvx = read_json(p)?;
        }
        if let Some(theta) = self.theta_max {
            cfg.scenario.theta_max = theta;
        }
        Ok(())
    }

    pub fn load(&self) -> Result<Problem, CliError> {
        let mut cfg = CampaignConfig::default();
        self.apply(&mut cfg)?;
        let problem = Problem {
            vehicle: cfg.vehicle,
            environment: cfg.environment,
            scenario: cfg.scenario,
            scvx: cfg.scvx,
        };
        problem.validate()?;
        Ok(problem)
    }
}

impl Problem {
    fn validate(&self) -> Result<(), CliError> {
        self.vehicle.validate()?;
        self.environment.validate()?;
        self.scenario.validate(&self.vehicle)?;
        self.scvx.validate()?;
        Ok(())
    }
}

/// Campaign configuration from the file, problem flags and overrides.
pub fn load_campaign(
    problem: &ProblemArgs,
    args: &CampaignArgs,
) -> Result<CampaignConfig, CliError> {
    let mut cfg = match &args.config {
        Some(p) => read_json(p)?,
        None => CampaignConfig::default(),
    };
    problem.apply(&mut cfg)?;
    if args.zero_perturbations {
        cfg.perturbations = PerturbationScales::zero();
        cfg.failures = FailureModel::disabled();
    }
    if args.no_failures {
        cfg.failures = FailureModel::disabled();
    }
    Ok(cfg)
}
