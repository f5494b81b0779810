//! Declarative experiment configuration, loaded from TOML.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use choicekit_core::inverse::Context;
use choicekit_gateway::agent::{Agent, SyntheticAgent, SyntheticKind};
use choicekit_gateway::http::{AgentConfig, HttpAgent};
use choicekit_gateway::prompt::{Style, Task};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    #[serde(rename = "forward-task-1")]
    ForwardTask1,
    #[serde(rename = "forward-task-2")]
    ForwardTask2,
    #[serde(rename = "forward-task-3")]
    ForwardTask3,
    InversePositive,
    InverseNegative,
    Fit,
    /// A forward task repeated over a temperature and persona sweep.
    Ablation,
}

impl ExperimentKind {
    pub fn id(self) -> &'static str {
        match self {
            Self::ForwardTask1 => "forward-task-1",
            Self::ForwardTask2 => "forward-task-2",
            Self::ForwardTask3 => "forward-task-3",
            Self::InversePositive => "inverse-positive",
            Self::InverseNegative => "inverse-negative",
            Self::Fit => "fit",
            Self::Ablation => "ablation",
        }
    }

    pub fn forward_task(self) -> Option<Task> {
        match self {
            Self::ForwardTask1 => Some(Task::PredictIndividual),
            Self::ForwardTask2 => Some(Task::PredictProportion),
            Self::ForwardTask3 => Some(Task::ActAsParticipant),
            _ => None,
        }
    }

    pub fn context(self) -> Option<Context> {
        match self {
            Self::InversePositive => Some(Context::Positive),
            Self::InverseNegative => Some(Context::Negative),
            _ => None,
        }
    }

    pub fn from_task(task: Task) -> Self {
        match task {
            Task::PredictIndividual => Self::ForwardTask1,
            Task::PredictProportion => Self::ForwardTask2,
            Task::ActAsParticipant => Self::ForwardTask3,
            Task::InversePairwise => Self::InversePositive,
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    /// Kind ids, plus the bare forward task numbers.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let all = [
            Self::ForwardTask1,
            Self::ForwardTask2,
            Self::ForwardTask3,
            Self::InversePositive,
            Self::InverseNegative,
            Self::Fit,
            Self::Ablation,
        ];
        if let Some(t) = s.parse::<u8>().ok().and_then(Task::forward) {
            return Ok(Self::from_task(t));
        }
        all.into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

/// One agent under test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum AgentSpec {
    Synthetic {
        /// `max-ev`, `luce-noisy:<beta>`, `uniform-random`, `fixed-first`.
        spec: String,
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        seed: u64,
    },
    Http(AgentConfig),
}

impl AgentSpec {
    pub fn synthetic(spec: impl Into<String>) -> Self {
        Self::Synthetic {
            spec: spec.into(),
            name: None,
            seed: 0,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Synthetic { spec, name, .. } => name.clone().unwrap_or_else(|| spec.clone()),
            Self::Http(cfg) => cfg.name.clone(),
        }
    }

    /// Sampling temperature; synthetic agents count as temperature 1.
    pub fn temperature(&self) -> f64 {
        match self {
            Self::Synthetic { .. } => 1.0,
            Self::Http(cfg) => cfg.temperature,
        }
    }

    pub fn max_in_flight(&self) -> usize {
        match self {
            Self::Synthetic { .. } => 1,
            Self::Http(cfg) => cfg.max_in_flight,
        }
    }

    pub fn set_temperature(&mut self, t: f64) {
        if let Self::Http(cfg) = self {
            cfg.temperature = t;
        }
    }

    pub fn build(&self) -> Result<Box<dyn Agent>, HarnessError> {
        match self {
            Self::Synthetic { spec, seed, .. } => {
                let kind: SyntheticKind = spec.parse().map_err(HarnessError::Config)?;
                Ok(Box::new(SyntheticAgent::new(kind, *seed)))
            }
            Self::Http(cfg) => {
                cfg.validate().map_err(HarnessError::Config)?;
                Ok(Box::new(HttpAgent::new(cfg.clone())))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub agents: Vec<AgentSpec>,
    /// choices13k CSV or canonical JSONL.
    pub dataset: Option<PathBuf>,
    /// Keep only the first N problems of the filtered set.
    pub limit: Option<usize>,
    /// Completions per problem for tasks 1 and 3; defaults to the
    /// problem's participant count.
    pub completions: Option<u32>,
    pub style: Style,
    pub persona: Option<String>,
    pub samples_positive: usize,
    pub samples_negative: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Runs abort once more than this share of completions fail to parse.
    pub max_failure_rate: f64,
    /// Quadrature nodes per item for model baselines.
    pub grid_points: usize,
    /// Optional human ranking of the 47 decisions, CSV `decision,score` or
    /// `decision,rank`.
    pub human_ranking: Option<PathBuf>,
    /// Forward record whose P(A) vector the `fit` experiment targets;
    /// human proportions when absent.
    pub fit_target: Option<PathBuf>,
    pub fit_restarts: usize,
    /// Ablation: forward task to sweep.
    pub ablation_task: u8,
    pub ablation_temperatures: Vec<f64>,
    pub ablation_personas: Vec<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::ForwardTask1,
            agents: Vec::new(),
            dataset: None,
            limit: None,
            completions: None,
            style: Style::ZeroShot,
            persona: None,
            samples_positive: 43,
            samples_negative: 42,
            seed: 0,
            out: PathBuf::from("runs"),
            max_failure_rate: 0.1,
            grid_points: 21,
            human_ranking: None,
            fit_target: None,
            fit_restarts: 20,
            ablation_task: 1,
            ablation_temperatures: Vec::new(),
            ablation_personas: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configs serialize")
    }

    /// Samples for an inverse context.
    pub fn samples(&self, context: Context) -> usize {
        match context {
            Context::Positive => self.samples_positive,
            Context::Negative => self.samples_negative,
        }
    }

    /// Static checks that do not touch the filesystem.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.samples_positive == 0 || self.samples_negative == 0 {
            return bad("sample sizes must be at least 1".into());
        }
        if self.completions == Some(0) {
            return bad("completions must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.max_failure_rate) {
            return bad(format!("max_failure_rate {} outside [0, 1]", self.max_failure_rate));
        }
        if self.grid_points < choicekit_core::inverse::GRID_MIN_POINTS {
            return bad(format!("grid_points {} too small", self.grid_points));
        }
        if self.fit_restarts == 0 {
            return bad("fit_restarts must be at least 1".into());
        }
        if Task::forward(self.ablation_task).is_none() {
            return bad(format!("ablation_task {} is not a forward task", self.ablation_task));
        }
        let mut names: Vec<String> = self.agents.iter().map(AgentSpec::name).collect();
        names.sort();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return bad(format!("duplicate agent name `{}`", w[0]));
        }
        Ok(())
    }

    /// Checks that referenced input files exist; called when a run starts.
    pub fn check_paths(&self) -> Result<(), HarnessError> {
        for p in [&self.dataset, &self.human_ranking, &self.fit_target].into_iter().flatten() {
            if !p.exists() {
                return Err(HarnessError::MissingInput(p.clone()));
            }
        }
        Ok(())
    }

    pub fn agent(&self, name: &str) -> Option<&AgentSpec> {
        self.agents.iter().find(|a| a.name() == name)
    }
}
