//! Closed-loop replanning executive and Monte Carlo campaigns.

mod executive;
mod runner;
mod stats;

pub use executive::{
    run_closed_loop, ClosedLoopFault, ClosedLoopFlight, ClosedLoopParams, ReplanEvent,
};
pub use runner::{
    fly, nominal_plan, records_from_csv, records_to_csv, run_campaign, run_seed, splitmix64,
    summarize, CampaignConfig, CampaignOutput, CampaignRecord, CampaignSummary, FlightMode,
    ModeSummary, NominalSummary, RecordRow, SuccessCriteria, RECORD_COLUMNS, SCHEMA_VERSION,
};
pub use stats::{quantile, Distribution};

use thiserror::Error;

use crate::guidance::{GuidanceError, ScvxStatus};
use crate::model::ModelError;
use crate::sim::SimError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CampaignError {
    #[error("invalid campaign configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Guidance(#[from] GuidanceError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("nominal plan did not converge: {0:?}")]
    NominalPlan(ScvxStatus),
}
