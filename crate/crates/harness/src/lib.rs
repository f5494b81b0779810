//! Experiment orchestration for the choice-model harness.
//!
//! A run issues every query of one experiment to one agent, stores each raw
//! completion before anything is aggregated, and derives P(A) vectors or
//! decision rankings from the stored raw results. Reports are pure
//! functions of saved records and model baselines.

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod config;
pub mod fit;
pub mod lock;
pub mod record;
pub mod report;
pub mod run;

pub use config::{AgentSpec, ExperimentConfig, ExperimentKind};
pub use lock::OutputLock;
pub use record::{Derived, FailureTally, RawResults, RunRecord};
pub use report::{report, Baselines, Tables};
pub use run::{run_forward, run_inverse, AgentUnderTest};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("input file {0} does not exist")]
    MissingInput(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Ingest(#[from] choicekit_core::choice::IngestError),
    #[error(transparent)]
    Prompt(#[from] choicekit_gateway::prompt::PromptError),
    #[error(transparent)]
    Metrics(#[from] choicekit_core::metrics::MetricsError),
    #[error(transparent)]
    Inverse(#[from] choicekit_core::inverse::InverseError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("output directory {0} is locked by another run")]
    Locked(PathBuf),
    #[error("{agent}: {failed} of {issued} completions failed; run aborted")]
    Aborted {
        agent: String,
        failed: usize,
        issued: usize,
        /// Everything collected before the abort.
        partial: Box<RunRecord>,
    },
    #[error("misaligned vectors: {0}")]
    Misaligned(String),
}

impl HarnessError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
