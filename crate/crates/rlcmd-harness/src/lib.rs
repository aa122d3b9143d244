//! Experiment harness: configuration, orchestration, CSV traces, SVG
//! plots, and the `verify` property battery, behind the `rlcmd` CLI.

pub mod config;
pub mod experiment;
pub mod plot;
pub mod trace_io;
pub mod verify;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),

    #[error(transparent)]
    Core(#[from] rlcmd_core::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub use config::{load_config, ExperimentConfig, ScheduleConfig};
pub use experiment::{run_experiment, ExperimentSummary};
pub use plot::{emit_plot, PlotColumn, PlotStyle};
pub use verify::{verify_config, CheckStatus, VerifyOptions, VerifyReport};
