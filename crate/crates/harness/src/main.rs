//! `choicekit` command-line entry point.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};

use choicekit::config::{AgentSpec, ExperimentConfig, ExperimentKind};
use choicekit::fit::run_fit;
use choicekit::report::{load_human_ranking, report, Baselines};
use choicekit::run::{find_records, run_and_save, run_dir, run_forward, run_inverse, AgentUnderTest};
use choicekit::{HarnessError, OutputLock, RunRecord};
use choicekit_core::behavioral::FitOptions;
use choicekit_core::choice::{filter_experiment_subset, load_choices13k, write_canonical, Dataset};
use choicekit_core::inverse::{catalog_47, write_catalog, Context};
use choicekit_gateway::prompt::Task;

#[derive(Parser, Debug)]
#[command(name = "choicekit", version, about = "Run and analyse risky-choice and inverse-preference experiments")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Agent name from the config, or a synthetic agent spec such as `max-ev`.
    #[arg(long, global = true)]
    agent: Option<String>,
    /// Forward task (1, 2, 3) or inverse context (positive, negative).
    #[arg(long, global = true)]
    task: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Inverse samples per context.
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true)]
    temperature: Option<f64>,
    #[arg(long, global = true)]
    persona: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load choices13k, apply the experiment filter, write canonical JSONL.
    Ingest {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    EvalForward,
    EvalInverse,
    /// Fit all behavioral families to human or agent proportions.
    Fit {
        /// Forward record to fit instead of human proportions.
        #[arg(long)]
        target: Option<PathBuf>,
    },
    /// Build tables from every record under the output directory.
    Report,
    /// Print the 47 inverse decisions as CSV.
    Catalog,
}

impl Cli {
    fn config(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(n) = self.samples {
            cfg.samples_positive = n;
            cfg.samples_negative = n;
        }
        if let Some(p) = &self.persona {
            cfg.persona = Some(p.clone());
        }
        if let Some(t) = self.temperature {
            cfg.agents.iter_mut().for_each(|a| a.set_temperature(t));
        }
        if let Some(name) = &self.agent {
            let chosen = match cfg.agent(name) {
                Some(a) => a.clone(),
                None => AgentSpec::synthetic(name.clone()),
            };
            cfg.agents = vec![chosen];
        }
        if let Some(t) = &self.task {
            cfg.kind = match t.as_str() {
                "positive" => ExperimentKind::InversePositive,
                "negative" => ExperimentKind::InverseNegative,
                other => other.parse().map_err(HarnessError::Config)?,
            };
        }
        cfg.validate()?;
        cfg.check_paths()?;
        Ok(cfg)
    }
}

fn dataset(cfg: &ExperimentConfig) -> Result<Dataset, HarnessError> {
    let path = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| HarnessError::Config("no dataset configured".into()))?;
    let data = filter_experiment_subset(&load_choices13k(path)?);
    Ok(match cfg.limit {
        Some(n) => data.truncated(n),
        None => data,
    })
}

fn agents(cfg: &ExperimentConfig) -> Result<Vec<AgentUnderTest>, HarnessError> {
    if cfg.agents.is_empty() {
        return Err(HarnessError::Config("no agents configured; pass --agent".into()));
    }
    cfg.agents.iter().map(AgentUnderTest::from_spec).collect()
}

fn write(path: &Path, text: &str) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

fn experiment_name(cfg: &ExperimentConfig, what: &str) -> String {
    let mut name = format!("{what}-{}", cfg.style);
    if let Some(p) = &cfg.persona {
        name.push_str(&format!("-{p}"));
    }
    name
}

fn ingest(cfg: &ExperimentConfig, path: Option<&Path>) -> Result<(), HarnessError> {
    let path = path
        .or(cfg.dataset.as_deref())
        .ok_or_else(|| HarnessError::Config("pass --dataset or set `dataset`".into()))?;
    let _lock = OutputLock::acquire(&cfg.out)?;
    let all = load_choices13k(path)?;
    let filtered = filter_experiment_subset(&all);
    let out = cfg.out.join("filtered.jsonl");
    let file = fs::File::create(&out).map_err(|e| HarnessError::io(&out, e))?;
    write_canonical(&filtered, io::BufWriter::new(file)).map_err(|e| HarnessError::io(&out, e))?;
    let summary = serde_json::json!({
        "source": path,
        "problems": all.len(),
        "ambiguous": all.problems().filter(|p| p.ambiguous).count(),
        "no_feedback": all.problems().filter(|p| !p.feedback).count(),
        "filtered": filtered.len(),
    });
    write(&cfg.out.join("ingest.json"), &serde_json::to_string_pretty(&summary)?)?;
    println!("{} problems, {} after filtering -> {}", all.len(), filtered.len(), out.display());
    Ok(())
}

fn eval_forward(cfg: &ExperimentConfig) -> Result<(), HarnessError> {
    let data = dataset(cfg)?;
    let _lock = OutputLock::acquire(&cfg.out)?;
    let mut runs: Vec<(ExperimentConfig, Task)> = Vec::new();
    if cfg.kind == ExperimentKind::Ablation {
        let task = Task::forward(cfg.ablation_task).expect("validated");
        let temps: Vec<Option<f64>> = if cfg.ablation_temperatures.is_empty() {
            vec![None]
        } else {
            cfg.ablation_temperatures.iter().copied().map(Some).collect()
        };
        let personas: Vec<Option<String>> = if cfg.ablation_personas.is_empty() {
            vec![cfg.persona.clone()]
        } else {
            cfg.ablation_personas.iter().cloned().map(Some).collect()
        };
        for t in &temps {
            for p in &personas {
                let mut c = cfg.clone();
                if let Some(t) = t {
                    c.agents.iter_mut().for_each(|a| a.set_temperature(*t));
                }
                c.persona = p.clone();
                runs.push((c, task));
            }
        }
    } else {
        let task = cfg
            .kind
            .forward_task()
            .ok_or_else(|| HarnessError::Config(format!("{} is not a forward experiment", cfg.kind.id())))?;
        runs.push((cfg.clone(), task));
    }
    for (c, task) in runs {
        for agent in agents(&c)? {
            let mut name = experiment_name(&c, task.id());
            if c.kind == ExperimentKind::Ablation {
                name.push_str(&format!("-t{}", agent.temperature));
            }
            let dir = run_dir(&c.out, &agent.name, &name);
            info!("{} -> {}", agent.name, dir.display());
            let rec = run_and_save(&dir, |t| run_forward(&c, &agent, task, &data, Some(t)))?;
            println!(
                "{}: {} issued, {} parsed, {} failed",
                rec.label(),
                rec.tally.issued,
                rec.tally.parsed,
                rec.tally.failed
            );
        }
    }
    Ok(())
}

fn eval_inverse(cfg: &ExperimentConfig) -> Result<(), HarnessError> {
    let contexts: Vec<Context> = match cfg.kind.context() {
        Some(c) => vec![c],
        None => Context::ALL.to_vec(),
    };
    let _lock = OutputLock::acquire(&cfg.out)?;
    for agent in agents(cfg)? {
        for &context in &contexts {
            let dir = run_dir(&cfg.out, &agent.name, &experiment_name(cfg, &format!("inverse-{context}")));
            let rec = run_and_save(&dir, |t| run_inverse(cfg, &agent, context, Some(t)))?;
            println!(
                "{}: {} samples, {} issued, {} failed",
                rec.label(),
                cfg.samples(context),
                rec.tally.issued,
                rec.tally.failed
            );
        }
    }
    Ok(())
}

fn fit(cfg: &ExperimentConfig, target: Option<&Path>) -> Result<(), HarnessError> {
    let data = dataset(cfg)?;
    let target = match target.or(cfg.fit_target.as_deref()) {
        Some(p) => Some(RunRecord::load(p)?),
        None => None,
    };
    let _lock = OutputLock::acquire(&cfg.out)?;
    let opts = FitOptions {
        restarts: cfg.fit_restarts,
        seed: cfg.seed,
        ..FitOptions::default()
    };
    let rep = run_fit(&data, target.as_ref(), &opts)?;
    write(&cfg.out.join("fit.json"), &serde_json::to_string_pretty(&rep)?)?;
    write(&cfg.out.join("fit.txt"), &rep.table)?;
    print!("{}", rep.table);
    Ok(())
}

fn make_report(cfg: &ExperimentConfig) -> Result<(), HarnessError> {
    let _lock = OutputLock::acquire(&cfg.out)?;
    let mut records = Vec::new();
    for p in find_records(&cfg.out)? {
        let r = RunRecord::load(&p)?;
        r.verify()?;
        records.push(r);
    }
    let mut baselines = match cfg.dataset {
        Some(_) => Baselines::forward(&dataset(cfg)?),
        None => Baselines::default(),
    };
    if records.iter().any(|r| r.inverse().is_some()) {
        baselines = baselines.with_model_scores(cfg.grid_points)?;
    }
    if let Some(h) = &cfg.human_ranking {
        baselines = baselines.with_human_ranking(load_human_ranking(h)?);
    }
    let tables = report(&records, &baselines)?;
    let md = tables.to_markdown();
    write(&cfg.out.join("tables.md"), &md)?;
    write(&cfg.out.join("tables.json"), &serde_json::to_string_pretty(&tables)?)?;
    print!("{md}");
    Ok(())
}

fn catalog(cfg_out: Option<&Path>) -> Result<(), HarnessError> {
    let decisions = catalog_47();
    match cfg_out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
            let path = dir.join("catalog.csv");
            let file = fs::File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
            write_catalog(&decisions, file).map_err(|e| HarnessError::Config(e.to_string()))
        }
        None => write_catalog(&decisions, io::stdout().lock()).map_err(|e| HarnessError::Config(e.to_string())),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Catalog => catalog(cli.out.as_deref()),
        cmd => cli.config().and_then(|cfg| match cmd {
            Command::Ingest { dataset } => ingest(&cfg, dataset.as_deref()),
            Command::EvalForward => eval_forward(&cfg),
            Command::EvalInverse => eval_inverse(&cfg),
            Command::Fit { target } => fit(&cfg, target.as_deref()),
            Command::Report => make_report(&cfg),
            Command::Catalog => unreachable!(),
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}
