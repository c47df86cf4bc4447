use std::path::PathBuf;

use pdg_core::campaign::CampaignError;
use pdg_core::guidance::{GuidanceError, ScvxStatus};
use pdg_core::model::ModelError;
use pdg_core::sim::SimError;
use thiserror::Error;

/// Exit codes of the `pdg` binary.
pub mod exit {
    pub const OK: u8 = 0;
    pub const IO: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const NOT_CONVERGED: u8 = 3;
    pub const INFEASIBLE: u8 = 4;
    pub const SIM_FAULT: u8 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("guidance did not converge: {0}")]
    NotConverged(String),
    #[error("guidance problem infeasible: {0}")]
    Infeasible(String),
    #[error("simulation fault: {0}")]
    Sim(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Io { .. } => exit::IO,
            CliError::NotConverged(_) => exit::NOT_CONVERGED,
            CliError::Infeasible(_) => exit::INFEASIBLE,
            CliError::Sim(_) => exit::SIM_FAULT,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Exit code for a finished SCvx solve.
pub fn status_code(status: ScvxStatus) -> u8 {
    match status {
        ScvxStatus::Converged => exit::OK,
        ScvxStatus::NotConverged => exit::NOT_CONVERGED,
        ScvxStatus::Infeasible => exit::INFEASIBLE,
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<GuidanceError> for CliError {
    fn from(e: GuidanceError) -> Self {
        match e {
            GuidanceError::Config(m) => CliError::Config(m),
            other => CliError::NotConverged(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(m) => CliError::Config(m),
            other => CliError::Sim(other.to_string()),
        }
    }
}

impl From<CampaignError> for CliError {
    fn from(e: CampaignError) -> Self {
        match e {
            CampaignError::Config(m) => CliError::Config(m),
            CampaignError::Model(e) => e.into(),
            CampaignError::Guidance(e) => e.into(),
            CampaignError::Sim(e) => e.into(),
            CampaignError::NominalPlan(status) => {
                let msg = format!("nominal plan ended {status:?}");
                match status {
                    ScvxStatus::Infeasible => CliError::Infeasible(msg),
                    _ => CliError::NotConverged(msg),
                }
            }
        }
    }
}
