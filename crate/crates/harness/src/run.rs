//! Forward and inverse experiment runners.
//!
//! Queries fan out over a thread pool bounded by the agent's in-flight
//! limit. Every query's seed is a function of the run seed and the item
//! index, and results are collected in item order, so the raw results do not
//! depend on scheduling.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use log::{info, warn};
use rayon::prelude::*;
use rayon::ThreadPool;

use choicekit_core::choice::Dataset;
use choicekit_core::inverse::{catalog_47, decision_seed, Context, DecisionStructure};
use choicekit_gateway::agent::{ask_forward, ask_inverse, ask_proportion, effective_completions, Agent, Payload, Query};
use choicekit_gateway::prompt::{render_forward_prompt, render_inverse_prompt, PromptSpec, Task};
use choicekit_gateway::transcript::{prompt_hash, Transcript};

use crate::config::{AgentSpec, ExperimentConfig};
use crate::record::{FailureTally, ForwardAnswers, ForwardItem, InverseSample, PairItem, RawResults, RunRecord};
use crate::HarnessError;

/// Problems per batch between failure-rate checks.
const FORWARD_CHUNK: usize = 64;

/// An agent plus the settings the runner needs to know about.
pub struct AgentUnderTest {
    pub name: String,
    pub temperature: f64,
    pub max_in_flight: usize,
    pub agent: Box<dyn Agent>,
}

impl AgentUnderTest {
    pub fn new(agent: Box<dyn Agent>) -> Self {
        Self {
            name: agent.name(),
            temperature: 1.0,
            max_in_flight: 1,
            agent,
        }
    }

    pub fn from_spec(spec: &AgentSpec) -> Result<Self, HarnessError> {
        Ok(Self {
            name: spec.name(),
            temperature: spec.temperature(),
            max_in_flight: spec.max_in_flight(),
            agent: spec.build()?,
        })
    }
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn pool(threads: usize) -> Result<ThreadPool, HarnessError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))
}

fn forward_item(
    agent: &AgentUnderTest,
    task: Task,
    spec: &PromptSpec,
    problem: &choicekit_core::ChoiceProblem,
    n_participants: u32,
    completions: Option<u32>,
    transcript: Option<&Transcript>,
) -> Result<ForwardItem, HarnessError> {
    let rendered = render_forward_prompt(problem, spec, n_participants)?;
    let requested = match task {
        Task::PredictProportion => 1,
        _ => effective_completions(
            spec.style,
            agent.temperature,
            completions.unwrap_or(n_participants).max(1) as usize,
        ),
    };
    let payload = Payload::Forward {
        task,
        shown: rendered.shown.clone(),
    };
    let query = Query::new(rendered.text.clone(), payload, requested, spec.seed);
    let result = match task {
        Task::PredictProportion => ask_proportion(agent.agent.as_ref(), &query, transcript).map(ForwardAnswers::Proportions),
        _ => ask_forward(agent.agent.as_ref(), &query, transcript).map(ForwardAnswers::Choices),
    };
    let (answers, error) = match result {
        Ok(a) => (Some(a), None),
        Err(e) => {
            warn!("{} on {}: {e}", agent.name, problem.id);
            (None, Some(e.to_string()))
        }
    };
    Ok(ForwardItem {
        problem_id: problem.id.clone(),
        seed: spec.seed,
        prompt_hash: prompt_hash(&rendered.text),
        swapped: rendered.swapped,
        requested,
        answers,
        error,
    })
}

fn finish(
    cfg: &ExperimentConfig,
    agent: &AgentUnderTest,
    persona: Option<String>,
    started: u64,
    complete: bool,
    raw: RawResults,
) -> Result<RunRecord, HarnessError> {
    Ok(RunRecord {
        config: cfg.clone(),
        agent: agent.name.clone(),
        style: cfg.style,
        persona,
        temperature: agent.temperature,
        started_unix: started,
        finished_unix: now(),
        complete,
        tally: raw.tally(),
        derived: raw.derive()?,
        raw,
    })
}

fn abort_if_failing(
    tally: &FailureTally,
    limit: f64,
    agent: &AgentUnderTest,
    partial: impl FnOnce() -> Result<RunRecord, HarnessError>,
) -> Result<(), HarnessError> {
    if tally.failure_rate() > limit {
        return Err(HarnessError::Aborted {
            agent: agent.name.clone(),
            failed: tally.failed,
            issued: tally.issued,
            partial: Box::new(partial()?),
        });
    }
    Ok(())
}

/// Runs forward task `task` over every problem of `dataset`.
pub fn run_forward(
    cfg: &ExperimentConfig,
    agent: &AgentUnderTest,
    task: Task,
    dataset: &Dataset,
    transcript: Option<&Transcript>,
) -> Result<RunRecord, HarnessError> {
    if !task.is_forward() {
        return Err(HarnessError::Config(format!("{} is not a forward task", task.id())));
    }
    if dataset.is_empty() {
        return Err(HarnessError::Config("dataset is empty".into()));
    }
    let started = now();
    let pool = pool(agent.max_in_flight)?;
    let mut items: Vec<ForwardItem> = Vec::with_capacity(dataset.len());
    let mut tally = FailureTally::default();
    let records = &dataset.records;
    for (c, chunk) in records.chunks(FORWARD_CHUNK).enumerate() {
        let base = c * FORWARD_CHUNK;
        let batch: Vec<ForwardItem> = pool.install(|| {
            chunk
                .par_iter()
                .enumerate()
                .map(|(k, rec)| {
                    let mut spec = PromptSpec::forward(task, cfg.style, decision_seed(cfg.seed, base + k));
                    spec.persona = cfg.persona.clone();
                    forward_item(
                        agent,
                        task,
                        &spec,
                        &rec.problem,
                        rec.observation.n_participants,
                        cfg.completions,
                        transcript,
                    )
                })
                .collect::<Result<_, _>>()
        })?;
        batch.iter().for_each(|i| tally.merge(i.tally()));
        items.extend(batch);
        abort_if_failing(&tally, cfg.max_failure_rate, agent, || {
            finish(cfg, agent, cfg.persona.clone(), started, false, RawResults::Forward { task, items: items.clone() })
        })?;
        info!("{}: {}/{} problems", agent.name, items.len(), records.len());
    }
    finish(cfg, agent, cfg.persona.clone(), started, true, RawResults::Forward { task, items })
}

/// Catalog index pairs `(i, j)`, `i < j`, in lexicographic order.
pub fn catalog_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect()
}

/// Seed of sample `s` in `context`.
pub fn sample_seed(run_seed: u64, context: Context, s: usize) -> u64 {
    let ctx = match context {
        Context::Positive => 0,
        Context::Negative => 1,
    };
    decision_seed(decision_seed(run_seed, ctx), s)
}

fn pair_item(
    agent: &AgentUnderTest,
    catalog: &[DecisionStructure],
    (i, j): (usize, usize),
    spec: &PromptSpec,
    context: Context,
    transcript: Option<&Transcript>,
) -> Result<PairItem, HarnessError> {
    let rendered = render_inverse_prompt((&catalog[i], &catalog[j]), spec)?;
    let payload = Payload::Inverse {
        context,
        shown: [rendered.layouts[0].shown.clone(), rendered.layouts[1].shown.clone()],
    };
    let query = Query::new(rendered.text.clone(), payload, 1, spec.seed);
    let (response, error) = match ask_inverse(agent.agent.as_ref(), &query, transcript) {
        Ok(mut r) if !r.is_empty() => (Some(r.swap_remove(0)), None),
        Ok(_) => (None, Some("no completions returned".to_string())),
        Err(e) => {
            warn!("{} on pair ({i}, {j}): {e}", agent.name);
            (None, Some(e.to_string()))
        }
    };
    Ok(PairItem {
        first: i,
        second: j,
        seed: spec.seed,
        prompt_hash: prompt_hash(&rendered.text),
        pair_swapped: rendered.pair_swapped,
        response,
        error,
    })
}

/// Judges all pairs of the catalog once per configured sample.
pub fn run_inverse(
    cfg: &ExperimentConfig,
    agent: &AgentUnderTest,
    context: Context,
    transcript: Option<&Transcript>,
) -> Result<RunRecord, HarnessError> {
    let started = now();
    let catalog = catalog_47();
    let decisions: Vec<String> = catalog.iter().map(DecisionStructure::notation).collect();
    let pairs = catalog_pairs(catalog.len());
    let pool = pool(agent.max_in_flight)?;
    let mut samples = Vec::with_capacity(cfg.samples(context));
    let mut tally = FailureTally::default();
    for s in 0..cfg.samples(context) {
        let seed = sample_seed(cfg.seed, context, s);
        let judged: Vec<PairItem> = pool.install(|| {
            pairs
                .par_iter()
                .enumerate()
                .map(|(k, &pair)| {
                    let spec = PromptSpec::inverse(context, cfg.style, decision_seed(seed, k));
                    pair_item(agent, &catalog, pair, &spec, context, transcript)
                })
                .collect::<Result<_, _>>()
        })?;
        judged.iter().for_each(|p| tally.merge(p.tally()));
        samples.push(InverseSample {
            index: s,
            seed,
            pairs: judged,
        });
        let raw = || RawResults::Inverse {
            context,
            decisions: decisions.clone(),
            samples: samples.clone(),
        };
        abort_if_failing(&tally, cfg.max_failure_rate, agent, || finish(cfg, agent, None, started, false, raw()))?;
        info!("{}: {context} sample {}/{}", agent.name, s + 1, cfg.samples(context));
    }
    let raw = RawResults::Inverse {
        context,
        decisions,
        samples,
    };
    finish(cfg, agent, None, started, true, raw)
}

/// Directory holding one run's record and transcript.
pub fn run_dir(out: &Path, agent: &str, experiment: &str) -> PathBuf {
    let clean = |s: &str| -> String {
        s.chars()
            .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
            .collect()
    };
    out.join(clean(agent)).join(clean(experiment))
}

pub const RECORD_FILE: &str = "record.json";
pub const TRANSCRIPT_FILE: &str = "raw.jsonl";

/// Runs `body` with a transcript in `dir` and saves whatever record results,
/// including the partial record of an aborted run.
pub fn run_and_save<F>(dir: &Path, body: F) -> Result<RunRecord, HarnessError>
where
    F: FnOnce(&Transcript) -> Result<RunRecord, HarnessError>,
{
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let transcript_path = dir.join(TRANSCRIPT_FILE);
    let transcript = Transcript::open(&transcript_path).map_err(|e| HarnessError::io(&transcript_path, e))?;
    let result = body(&transcript);
    transcript.flush().map_err(|e| HarnessError::io(&transcript_path, e))?;
    let record_path = dir.join(RECORD_FILE);
    match result {
        Ok(record) => {
            record.save(&record_path)?;
            Ok(record)
        }
        Err(HarnessError::Aborted {
            agent,
            failed,
            issued,
            partial,
        }) => {
            partial.save(&record_path)?;
            Err(HarnessError::Aborted {
                agent,
                failed,
                issued,
                partial,
            })
        }
        Err(e) => Err(e),
    }
}

/// Every `record.json` below `dir`, sorted by path.
pub fn find_records(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(|e| HarnessError::io(&d, e))? {
            let path = entry.map_err(|e| HarnessError::io(&d, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n == RECORD_FILE) {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_enumeration() {
        let p = catalog_pairs(47);
        assert_eq!(p.len(), 1081);
        assert_eq!(p[0], (0, 1));
        assert_eq!(p[1080], (45, 46));
        assert!(p.iter().all(|&(i, j)| i < j));
    }

    #[test]
    fn sample_seeds_differ() {
        let a = sample_seed(1, Context::Positive, 0);
        assert_ne!(a, sample_seed(1, Context::Negative, 0));
        assert_ne!(a, sample_seed(1, Context::Positive, 1));
        assert_eq!(a, sample_seed(1, Context::Positive, 0));
    }

    #[test]
    fn run_dirs_are_sanitized() {
        let d = run_dir(Path::new("out"), "luce-noisy:2", "task 1/zero-shot");
        assert_eq!(d, Path::new("out/luce-noisy_2/task_1_zero-shot"));
    }
}
