//! The agent abstraction, synthetic reference agents, and the query loop
//! with its single re-prompt.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use choicekit_core::choice::{ChoiceProblem, Gamble};
use choicekit_core::inverse::{Context, DecisionStructure};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parse::{parse_forward, parse_inverse, parse_proportion, InverseParse, InverseVerdict, Machine};
use crate::prompt::{Style, Task};
use crate::transcript::Transcript;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AgentError {
    #[error("request timed out")]
    Timeout,
    #[error("authentication rejected (HTTP {0})")]
    Auth(u16),
    #[error("malformed endpoint reply: {0}")]
    Malformed(String),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("agent cannot answer this query: {0}")]
    Unsupported(String),
    #[error("API key variable `{0}` is not set")]
    MissingKey(String),
}

impl AgentError {
    /// Worth retrying.
    pub fn is_transient(&self) -> bool {
        match self {
            Self::Timeout | Self::Transport(_) => true,
            Self::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

/// Structured view of what the prompt shows, for agents that answer without
/// reading text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Forward {
        task: Task,
        /// The problem as shown (Machine A first).
        shown: ChoiceProblem,
    },
    Inverse {
        context: Context,
        /// Choice 1 and Choice 2 as shown.
        shown: [DecisionStructure; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub messages: Vec<ChatMessage>,
    pub payload: Payload,
    pub completions: usize,
    /// Per-query seed for synthetic agents.
    pub seed: u64,
}

impl Query {
    pub fn new(prompt: impl Into<String>, payload: Payload, completions: usize, seed: u64) -> Self {
        Self {
            messages: vec![ChatMessage::user(prompt)],
            payload,
            completions: completions.max(1),
            seed,
        }
    }

    pub fn prompt_text(&self) -> String {
        self.messages
            .iter()
            .map(|m| format!("{}: {}", m.role, m.content))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

pub trait Agent: Send + Sync {
    fn name(&self) -> String;

    /// Returns `query.completions` raw replies (an endpoint may return fewer).
    fn complete(&self, query: &Query) -> Result<Vec<String>, AgentError>;
}

/// Chain-of-thought at temperature zero is deterministic, so one
/// completion is enough.
pub fn effective_completions(style: Style, temperature: f64, requested: usize) -> usize {
    if style == Style::ChainOfThought && temperature == 0.0 {
        1
    } else {
        requested.max(1)
    }
}

// ---------------------------------------------------------------------------
// Synthetic agents
// ---------------------------------------------------------------------------

/// Decision scores keyed by [`DecisionStructure::canonical`] notation.
pub type ScoreTable = HashMap<String, f64>;

#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticKind {
    /// Picks the higher expected value; coin flip on ties.
    MaxEv,
    /// Picks A with probability σ(β·(EV_A − EV_B)).
    LuceNoisy { beta: f64 },
    UniformRandom,
    /// Always the first machine / first choice.
    FixedFirst,
    /// Judges inverse pairs by a table of decision scores.
    ScoreOracle(ScoreTable),
}

impl SyntheticKind {
    pub fn id(&self) -> String {
        match self {
            Self::MaxEv => "max-ev".into(),
            Self::LuceNoisy { beta } => format!("luce-noisy:{beta}"),
            Self::UniformRandom => "uniform-random".into(),
            Self::FixedFirst => "fixed-first".into(),
            Self::ScoreOracle(_) => "score-oracle".into(),
        }
    }
}

impl FromStr for SyntheticKind {
    type Err = String;

    /// `max-ev`, `luce-noisy:<beta>`, `uniform-random`, `fixed-first`.
    /// Score oracles are built in code.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max-ev" => Ok(Self::MaxEv),
            "uniform-random" => Ok(Self::UniformRandom),
            "fixed-first" => Ok(Self::FixedFirst),
            _ => {
                let beta = s
                    .strip_prefix("luce-noisy:")
                    .ok_or_else(|| format!("unknown synthetic agent `{s}`"))?;
                let beta: f64 = beta.parse().map_err(|_| format!("bad beta `{beta}`"))?;
                if !(beta.is_finite() && beta >= 0.0) {
                    return Err(format!("beta must be non-negative, got {beta}"));
                }
                Ok(Self::LuceNoisy { beta })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticAgent {
    pub kind: SyntheticKind,
    pub seed: u64,
}

impl SyntheticAgent {
    pub fn new(kind: SyntheticKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    fn rng(&self, query: &Query) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(query.seed);
        rng
    }

    fn forward(&self, task: Task, p: &ChoiceProblem, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<String>, AgentError> {
        let ev = |g: &Gamble| g.outcomes().map(|(x, q)| x * q).sum::<f64>();
        let diff = ev(&p.gamble_a) - ev(&p.gamble_b);
        let p_a = match &self.kind {
            SyntheticKind::MaxEv => choicekit_core::choice::ev_decision(diff, 0.0),
            SyntheticKind::UniformRandom => 0.5,
            SyntheticKind::LuceNoisy { beta } => 1.0 / (1.0 + (-beta * diff).exp()),
            SyntheticKind::FixedFirst => 1.0,
            SyntheticKind::ScoreOracle(_) => {
                return Err(AgentError::Unsupported("score oracles only judge inverse pairs".into()))
            }
        };
        Ok(match task {
            Task::PredictProportion => {
                let pct = 100.0 * p_a;
                vec![format!("{{\"Machine A\": {pct}, \"Machine B\": {}}}", 100.0 - pct); n]
            }
            _ => (0..n)
                .map(|_| if rng.random::<f64>() < p_a { "A" } else { "B" }.to_string())
                .collect(),
        })
    }

    fn inverse(&self, shown: &[DecisionStructure; 2], n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<String>, AgentError> {
        let say = |v: InverseVerdict| {
            match v {
                InverseVerdict::First => "Choice 1",
                InverseVerdict::Second => "Choice 2",
                InverseVerdict::Tie => "They are equally informative.",
            }
            .to_string()
        };
        match &self.kind {
            SyntheticKind::FixedFirst => Ok(vec![say(InverseVerdict::First); n]),
            SyntheticKind::UniformRandom => Ok((0..n)
                .map(|_| {
                    say(if rng.random::<bool>() {
                        InverseVerdict::First
                    } else {
                        InverseVerdict::Second
                    })
                })
                .collect()),
            SyntheticKind::ScoreOracle(table) => {
                let score = |d: &DecisionStructure| {
                    let key = d.canonical().notation();
                    table
                        .get(&key)
                        .copied()
                        .ok_or_else(|| AgentError::Unsupported(format!("no score for decision `{key}`")))
                };
                let (s1, s2) = (score(&shown[0])?, score(&shown[1])?);
                let v = if s1 > s2 {
                    InverseVerdict::First
                } else if s2 > s1 {
                    InverseVerdict::Second
                } else {
                    InverseVerdict::Tie
                };
                Ok(vec![say(v); n])
            }
            other => Err(AgentError::Unsupported(format!("{} does not judge inverse pairs", other.id()))),
        }
    }
}

impl Agent for SyntheticAgent {
    fn name(&self) -> String {
        self.kind.id()
    }

    fn complete(&self, query: &Query) -> Result<Vec<String>, AgentError> {
        let mut rng = self.rng(query);
        let n = query.completions.max(1);
        match &query.payload {
            Payload::Forward { task, shown } => self.forward(*task, shown, n, &mut rng),
            Payload::Inverse { shown, .. } => self.inverse(shown, n, &mut rng),
        }
    }
}

// ---------------------------------------------------------------------------
// Query loop
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseStatus {
    Parsed,
    Reprompted,
    Failed,
}

/// One completion and its classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentResponse<V> {
    pub raw: String,
    /// Reply to the clarification prompt, when one was sent.
    pub reprompt_raw: Option<String>,
    pub verdict: Option<V>,
    pub status: ParseStatus,
}

pub const FORWARD_REPROMPT: &str =
    "Please classify your previous answer. Respond with only the letter A or B.";
pub const PROPORTION_REPROMPT: &str =
    "Please restate your previous answer as the percentage of people who choose Machine A and Machine B in the json format, for example {\"Machine A\": 50, \"Machine B\": 50}.";
pub const INVERSE_REPROMPT: &str =
    "Please classify your previous answer. Respond with only \"Choice 1\", \"Choice 2\", or \"Tie\".";

/// Issues `query`, classifies each completion, and re-prompts at most once
/// per completion that cannot be classified.
pub fn ask<V, P>(
    agent: &dyn Agent,
    query: &Query,
    parse: P,
    reprompt: &str,
    transcript: Option<&Transcript>,
) -> Result<Vec<AgentResponse<V>>, AgentError>
where
    V: Serialize + Clone,
    P: Fn(&str) -> Option<V>,
{
    let raws = agent.complete(query)?;
    let prompt = query.prompt_text();
    let mut out = Vec::with_capacity(raws.len());
    for raw in raws {
        let first = parse(&raw);
        let response = match first {
            Some(v) => AgentResponse {
                raw,
                reprompt_raw: None,
                verdict: Some(v),
                status: ParseStatus::Parsed,
            },
            None => {
                if let Some(t) = transcript {
                    t.record(&prompt, &raw, ParseStatus::Failed, None::<&V>);
                }
                let mut follow = query.clone();
                follow.messages.push(ChatMessage::assistant(raw.clone()));
                follow.messages.push(ChatMessage::user(reprompt));
                follow.completions = 1;
                let second = agent
                    .complete(&follow)
                    .ok()
                    .and_then(|mut r| if r.is_empty() { None } else { Some(r.swap_remove(0)) });
                let verdict = second.as_deref().and_then(&parse);
                let status = if verdict.is_some() {
                    ParseStatus::Reprompted
                } else {
                    ParseStatus::Failed
                };
                if let (Some(t), Some(s)) = (transcript, &second) {
                    t.record(&follow.prompt_text(), s, status, verdict.as_ref());
                }
                out.push(AgentResponse {
                    raw,
                    reprompt_raw: second,
                    verdict,
                    status,
                });
                continue;
            }
        };
        if let Some(t) = transcript {
            t.record(&prompt, &response.raw, response.status, response.verdict.as_ref());
        }
        out.push(response);
    }
    Ok(out)
}

pub fn ask_forward(agent: &dyn Agent, query: &Query, transcript: Option<&Transcript>) -> Result<Vec<AgentResponse<Machine>>, AgentError> {
    ask(agent, query, parse_forward, FORWARD_REPROMPT, transcript)
}

pub fn ask_proportion(agent: &dyn Agent, query: &Query, transcript: Option<&Transcript>) -> Result<Vec<AgentResponse<f64>>, AgentError> {
    ask(agent, query, parse_proportion, PROPORTION_REPROMPT, transcript)
}

pub fn ask_inverse(
    agent: &dyn Agent,
    query: &Query,
    transcript: Option<&Transcript>,
) -> Result<Vec<AgentResponse<InverseVerdict>>, AgentError> {
    let parse = |s: &str| match parse_inverse(s) {
        InverseParse::Verdict(v) => Some(v),
        InverseParse::NeedsReprompt => None,
    };
    ask(agent, query, parse, INVERSE_REPROMPT, transcript)
}

impl fmt::Display for Machine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Machine::A => "A",
            Machine::B => "B",
        })
    }
}
