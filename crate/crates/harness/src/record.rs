//! Run records: raw results first, derived aggregates second.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use choicekit_core::inverse::Context;
use choicekit_core::metrics::{aggregate_pairwise, PairwiseOutcome, Ranking, Verdict};
use choicekit_gateway::agent::{AgentResponse, ParseStatus};
use choicekit_gateway::parse::{InverseVerdict, Machine};
use choicekit_gateway::prompt::{Style, Task};

use crate::config::ExperimentConfig;
use crate::HarnessError;

/// Completion counts. `parsed + failed == issued` always holds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureTally {
    pub issued: usize,
    /// Classified, directly or after a re-prompt.
    pub parsed: usize,
    /// The subset of `parsed` that needed a re-prompt.
    pub reprompted: usize,
    /// Unclassified after a re-prompt, or lost to an agent error.
    pub failed: usize,
}

impl FailureTally {
    pub fn add_status(&mut self, status: ParseStatus) {
        self.issued += 1;
        match status {
            ParseStatus::Parsed => self.parsed += 1,
            ParseStatus::Reprompted => {
                self.parsed += 1;
                self.reprompted += 1;
            }
            ParseStatus::Failed => self.failed += 1,
        }
    }

    pub fn add_lost(&mut self, n: usize) {
        self.issued += n;
        self.failed += n;
    }

    pub fn merge(&mut self, other: FailureTally) {
        self.issued += other.issued;
        self.parsed += other.parsed;
        self.reprompted += other.reprompted;
        self.failed += other.failed;
    }

    pub fn failure_rate(&self) -> f64 {
        if self.issued == 0 {
            0.0
        } else {
            self.failed as f64 / self.issued as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForwardAnswers {
    Choices(Vec<AgentResponse<Machine>>),
    Proportions(Vec<AgentResponse<f64>>),
}

impl ForwardAnswers {
    fn statuses(&self) -> Vec<ParseStatus> {
        match self {
            Self::Choices(r) => r.iter().map(|x| x.status).collect(),
            Self::Proportions(r) => r.iter().map(|x| x.status).collect(),
        }
    }
}

/// Everything returned for one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardItem {
    pub problem_id: String,
    pub seed: u64,
    pub prompt_hash: String,
    /// Gamble B was shown as Machine A.
    pub swapped: bool,
    pub requested: usize,
    pub answers: Option<ForwardAnswers>,
    pub error: Option<String>,
}

impl ForwardItem {
    pub fn tally(&self) -> FailureTally {
        let mut t = FailureTally::default();
        match &self.answers {
            Some(a) => {
                let statuses = a.statuses();
                for s in &statuses {
                    t.add_status(*s);
                }
                t.add_lost(self.requested.saturating_sub(statuses.len()));
            }
            None => t.add_lost(self.requested),
        }
        t
    }

    /// P(original gamble A) from the parsed answers.
    pub fn p_a(&self) -> Option<f64> {
        match self.answers.as_ref()? {
            ForwardAnswers::Choices(r) => {
                let verdicts: Vec<Machine> = r.iter().filter_map(|x| x.verdict).collect();
                if verdicts.is_empty() {
                    return None;
                }
                let a = verdicts
                    .iter()
                    .filter(|&&m| (m == Machine::A) != self.swapped)
                    .count();
                Some(a as f64 / verdicts.len() as f64)
            }
            ForwardAnswers::Proportions(r) => {
                let shown = r.iter().find_map(|x| x.verdict)?;
                Some(if self.swapped { 1.0 - shown } else { shown })
            }
        }
    }
}

/// One judged pair of catalog decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairItem {
    /// Catalog indices, `first < second`.
    pub first: usize,
    pub second: usize,
    pub seed: u64,
    pub prompt_hash: String,
    /// `second` was shown as Choice 1.
    pub pair_swapped: bool,
    pub response: Option<AgentResponse<InverseVerdict>>,
    pub error: Option<String>,
}

impl PairItem {
    pub fn tally(&self) -> FailureTally {
        let mut t = FailureTally::default();
        match &self.response {
            Some(r) => t.add_status(r.status),
            None => t.add_lost(1),
        }
        t
    }

    /// The verdict in terms of `(first, second)`.
    pub fn outcome(&self) -> Option<PairwiseOutcome> {
        let v = self.response.as_ref()?.verdict?;
        let verdict = match (v, self.pair_swapped) {
            (InverseVerdict::Tie, _) => Verdict::Tie,
            (InverseVerdict::First, false) | (InverseVerdict::Second, true) => Verdict::FirstStronger,
            (InverseVerdict::Second, false) | (InverseVerdict::First, true) => Verdict::SecondStronger,
        };
        Some(PairwiseOutcome {
            first: self.first,
            second: self.second,
            verdict,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseSample {
    pub index: usize,
    pub seed: u64,
    pub pairs: Vec<PairItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "experiment")]
pub enum RawResults {
    Forward { task: Task, items: Vec<ForwardItem> },
    Inverse {
        context: Context,
        /// Catalog notations, indexed as in the pair items.
        decisions: Vec<String>,
        samples: Vec<InverseSample>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardDerived {
    pub problem_ids: Vec<String>,
    pub p_a: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseDerived {
    pub decisions: Vec<String>,
    pub sample_rankings: Vec<Ranking>,
    /// Mean win score across samples, re-ranked.
    pub ranking: Option<Ranking>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Derived {
    Forward(ForwardDerived),
    Inverse(InverseDerived),
}

impl RawResults {
    pub fn tally(&self) -> FailureTally {
        let mut t = FailureTally::default();
        match self {
            Self::Forward { items, .. } => items.iter().for_each(|i| t.merge(i.tally())),
            Self::Inverse { samples, .. } => samples
                .iter()
                .flat_map(|s| &s.pairs)
                .for_each(|p| t.merge(p.tally())),
        }
        t
    }

    /// Pure derivation of aggregates from raw results.
    pub fn derive(&self) -> Result<Derived, HarnessError> {
        Ok(match self {
            Self::Forward { items, .. } => Derived::Forward(ForwardDerived {
                problem_ids: items.iter().map(|i| i.problem_id.clone()).collect(),
                p_a: items.iter().map(ForwardItem::p_a).collect(),
            }),
            Self::Inverse { decisions, samples, .. } => {
                let sample_rankings = samples
                    .iter()
                    .map(|s| {
                        let outcomes: Vec<PairwiseOutcome> = s.pairs.iter().filter_map(PairItem::outcome).collect();
                        aggregate_pairwise(&outcomes, decisions.len())
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Derived::Inverse(InverseDerived {
                    decisions: decisions.clone(),
                    ranking: Ranking::mean_of(&sample_rankings),
                    sample_rankings,
                })
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub agent: String,
    pub style: Style,
    pub persona: Option<String>,
    pub temperature: f64,
    pub started_unix: u64,
    pub finished_unix: u64,
    /// False when the run was aborted.
    pub complete: bool,
    pub tally: FailureTally,
    pub raw: RawResults,
    pub derived: Derived,
}

impl RunRecord {
    pub fn task(&self) -> Option<Task> {
        match &self.raw {
            RawResults::Forward { task, .. } => Some(*task),
            RawResults::Inverse { .. } => None,
        }
    }

    pub fn context(&self) -> Option<Context> {
        match &self.raw {
            RawResults::Inverse { context, .. } => Some(*context),
            RawResults::Forward { .. } => None,
        }
    }

    pub fn forward(&self) -> Option<&ForwardDerived> {
        match &self.derived {
            Derived::Forward(f) => Some(f),
            Derived::Inverse(_) => None,
        }
    }

    pub fn inverse(&self) -> Option<&InverseDerived> {
        match &self.derived {
            Derived::Inverse(i) => Some(i),
            Derived::Forward(_) => None,
        }
    }

    /// Short label such as `gpt-4 task-1 zero-shot`.
    pub fn label(&self) -> String {
        let what = match &self.raw {
            RawResults::Forward { task, .. } => task.id().to_string(),
            RawResults::Inverse { context, .. } => context.name().to_string(),
        };
        let mut s = format!("{} {what} {}", self.agent, self.style);
        if let Some(p) = &self.persona {
            s.push_str(&format!(" [{p}]"));
        }
        s
    }

    /// Checks that the stored aggregates match the raw results.
    pub fn verify(&self) -> Result<(), HarnessError> {
        if self.raw.derive()? != self.derived || self.raw.tally() != self.tally {
            return Err(HarnessError::Misaligned(format!(
                "{}: derived values disagree with raw results",
                self.label()
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        }
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| HarnessError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resp<V>(v: Option<V>, status: ParseStatus) -> AgentResponse<V> {
        AgentResponse {
            raw: String::new(),
            reprompt_raw: None,
            verdict: v,
            status,
        }
    }

    #[test]
    fn forward_item_maps_back_through_the_swap() {
        let mut item = ForwardItem {
            problem_id: "p".into(),
            seed: 0,
            prompt_hash: String::new(),
            swapped: true,
            requested: 5,
            answers: Some(ForwardAnswers::Choices(vec![
                resp(Some(Machine::A), ParseStatus::Parsed),
                resp(Some(Machine::B), ParseStatus::Reprompted),
                resp(Some(Machine::B), ParseStatus::Parsed),
                resp(None, ParseStatus::Failed),
            ])),
            error: None,
        };
        assert_eq!(item.p_a(), Some(2.0 / 3.0));
        let t = item.tally();
        assert_eq!((t.issued, t.parsed, t.reprompted, t.failed), (5, 3, 1, 2));
        item.answers = Some(ForwardAnswers::Proportions(vec![resp(Some(0.3), ParseStatus::Parsed)]));
        assert!((item.p_a().unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn pair_outcomes_follow_display_order() {
        let mut item = PairItem {
            first: 2,
            second: 7,
            seed: 0,
            prompt_hash: String::new(),
            pair_swapped: true,
            response: Some(resp(Some(InverseVerdict::First), ParseStatus::Parsed)),
            error: None,
        };
        assert_eq!(item.outcome().unwrap().verdict, Verdict::SecondStronger);
        item.pair_swapped = false;
        assert_eq!(item.outcome().unwrap().verdict, Verdict::FirstStronger);
        item.response = None;
        assert_eq!(item.outcome(), None);
        assert_eq!(item.tally().failed, 1);
    }
}
