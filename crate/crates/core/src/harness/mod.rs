//! Experiment driver: configuration, evaluation runs, sweeps and output files.

pub mod config;
pub mod jobs;
pub mod metrics;
pub mod output;
pub mod run;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use config::{EvalMode, ExperimentConfig, SweepAxis};
pub use metrics::{Aggregates, LongRow, MetricMeans, MetricRow, WaypointRow};
pub use output::{Manifest, OutputFormat};
pub use run::{run_episode, run_eval, run_sweep, run_training_eval, worker_pool, Controller};

/// Controller tag used in tables and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Ddpg,
    Optimal,
    Realistic,
}

impl ControllerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ControllerKind::Ddpg => "ddpg",
            ControllerKind::Optimal => "optimal",
            ControllerKind::Realistic => "realistic",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ddpg" => Ok(ControllerKind::Ddpg),
            "optimal" => Ok(ControllerKind::Optimal),
            "realistic" => Ok(ControllerKind::Realistic),
            other => Err(Error::config(format!("unknown controller '{other}'"))),
        }
    }
}
