//! Correlation tables from saved run records.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use choicekit_core::choice::Dataset;
use choicekit_core::inverse::{catalog_47, catalog_index, score_grid_batch, Context, PriorSpec, ScoreKind};
use choicekit_core::metrics::{correlation_matrix, CorrelationKind, CorrelationMatrix, CorrelationReport};
use choicekit_gateway::prompt::Style;

use crate::record::RunRecord;
use crate::HarnessError;

/// Reference vectors the records are compared against.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub problem_ids: Vec<String>,
    pub human: Vec<f64>,
    pub max_ev: Vec<f64>,
    /// Named decision-score vectors per context, catalog order.
    pub inverse: Vec<InverseBaseline>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseBaseline {
    pub context: Context,
    pub name: String,
    pub scores: Vec<f64>,
}

impl Baselines {
    pub fn forward(dataset: &Dataset) -> Self {
        Self {
            problem_ids: dataset.problems().map(|p| p.id.clone()).collect(),
            human: dataset.human_props(),
            max_ev: dataset.max_ev_vector(),
            inverse: Vec::new(),
        }
    }

    /// Adds grid scores of all four kinds for both contexts.
    pub fn with_model_scores(mut self, points: usize) -> Result<Self, HarnessError> {
        let catalog = catalog_47();
        for context in Context::ALL {
            let sets = score_grid_batch(&catalog, &PriorSpec::new(context), points)?;
            for kind in ScoreKind::ALL {
                self.inverse.push(InverseBaseline {
                    context,
                    name: kind.name().to_string(),
                    scores: sets.iter().map(|s| s.get(kind)).collect(),
                });
            }
        }
        Ok(self)
    }

    /// Adds a human ranking for both contexts.
    pub fn with_human_ranking(mut self, scores: Vec<f64>) -> Self {
        for context in Context::ALL {
            self.inverse.push(InverseBaseline {
                context,
                name: "humans".into(),
                scores: scores.clone(),
            });
        }
        self
    }
}

/// Reads a human ranking of the catalog: CSV with a `decision` column in
/// catalog notation and either `score` (higher is stronger) or `rank`
/// (1 is strongest). Returns scores in catalog order.
pub fn load_human_ranking(path: &Path) -> Result<Vec<f64>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let bad = |m: String| HarnessError::Config(format!("{}: {m}", path.display()));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| bad("empty file".into()))?
        .split(',')
        .map(|h| h.trim().to_ascii_lowercase())
        .collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    let d = col("decision").ok_or_else(|| bad("missing `decision` column".into()))?;
    let (v, sign) = match (col("score"), col("rank")) {
        (Some(s), _) => (s, 1.0),
        (None, Some(r)) => (r, -1.0),
        (None, None) => return Err(bad("need a `score` or `rank` column".into())),
    };
    let mut scores = vec![None; 47];
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let notation = fields.get(d).ok_or_else(|| bad(format!("row {row}: short row")))?;
        let idx = notation
            .parse::<choicekit_core::DecisionStructure>()
            .ok()
            .and_then(|ds| catalog_index(&ds.canonical().notation()).or_else(|| catalog_index(notation)))
            .ok_or_else(|| bad(format!("row {row}: `{notation}` is not a catalog decision")))?;
        let value: f64 = fields
            .get(v)
            .and_then(|x| x.parse().ok())
            .ok_or_else(|| bad(format!("row {row}: bad value")))?;
        scores[idx] = Some(sign * value);
    }
    scores
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| bad(format!("decision {} missing", catalog_47()[i].notation()))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardRow {
    pub label: String,
    pub agent: String,
    pub task: String,
    pub style: Style,
    pub persona: Option<String>,
    pub report: CorrelationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseRow {
    pub agent: String,
    pub context: Context,
    pub style: Style,
    pub baseline: String,
    pub spearman: f64,
    pub pearson: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub title: String,
    pub matrix: CorrelationMatrix,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Tables {
    /// Agents against human proportions.
    pub vs_humans: Vec<ForwardRow>,
    /// Agents and humans against the max-EV baseline.
    pub vs_max_ev: Vec<ForwardRow>,
    /// Inverse rankings against model and human rankings.
    pub inverse: Vec<InverseRow>,
    pub heatmaps: Vec<Heatmap>,
}

/// Members of one heatmap, keyed by (task or context, style).
type Groups<V> = BTreeMap<(String, String), Vec<(String, V)>>;

/// Keeps positions where `p` has a value.
fn paired(p: &[Option<f64>], base: &[f64]) -> (Vec<f64>, Vec<f64>) {
    p.iter()
        .zip(base)
        .filter_map(|(a, &b)| a.map(|a| (a, b)))
        .unzip()
}

fn forward_row(r: &RunRecord, p: &[Option<f64>], base: &[f64]) -> Result<ForwardRow, HarnessError> {
    let (x, y) = paired(p, base);
    Ok(ForwardRow {
        label: r.label(),
        agent: r.agent.clone(),
        task: r.task().map(|t| t.id().to_string()).unwrap_or_default(),
        style: r.style,
        persona: r.persona.clone(),
        report: CorrelationReport::compute(&x, &y)?,
    })
}

/// Builds every table. Pure: the same records and baselines always give
/// the same tables.
pub fn report(records: &[RunRecord], baselines: &Baselines) -> Result<Tables, HarnessError> {
    let mut tables = Tables::default();
    if !baselines.human.is_empty() {
        let humans = CorrelationReport::compute(&baselines.human, &baselines.max_ev)?;
        tables.vs_max_ev.push(ForwardRow {
            label: "Humans".into(),
            agent: "humans".into(),
            task: String::new(),
            style: Style::ZeroShot,
            persona: None,
            report: humans,
        });
    }
    let mut forward_groups: Groups<Vec<Option<f64>>> = BTreeMap::new();
    let mut inverse_groups: Groups<Vec<f64>> = BTreeMap::new();

    for r in records {
        if let Some(f) = r.forward() {
            if f.problem_ids != baselines.problem_ids {
                return Err(HarnessError::Misaligned(format!(
                    "{}: {} problems do not match the {} baseline problems",
                    r.label(),
                    f.problem_ids.len(),
                    baselines.problem_ids.len()
                )));
            }
            tables.vs_humans.push(forward_row(r, &f.p_a, &baselines.human)?);
            tables.vs_max_ev.push(forward_row(r, &f.p_a, &baselines.max_ev)?);
            forward_groups
                .entry((r.task().map(|t| t.id().to_string()).unwrap_or_default(), r.style.to_string()))
                .or_default()
                .push((r.label(), f.p_a.clone()));
        }
        if let (Some(inv), Some(context)) = (r.inverse(), r.context()) {
            let Some(ranking) = &inv.ranking else { continue };
            for b in baselines.inverse.iter().filter(|b| b.context == context) {
                if b.scores.len() != ranking.scores.len() {
                    return Err(HarnessError::Misaligned(format!(
                        "{} has {} decisions, baseline {} has {}",
                        r.label(),
                        ranking.scores.len(),
                        b.name,
                        b.scores.len()
                    )));
                }
                let report = CorrelationReport::compute(&ranking.scores, &b.scores)?;
                tables.inverse.push(InverseRow {
                    agent: r.agent.clone(),
                    context,
                    style: r.style,
                    baseline: b.name.clone(),
                    spearman: report.spearman,
                    pearson: report.pearson,
                });
            }
            inverse_groups
                .entry((context.name().to_string(), r.style.to_string()))
                .or_default()
                .push((r.label(), ranking.scores.clone()));
        }
    }

    for ((task, style), members) in forward_groups {
        // problems every member answered
        let keep: Vec<usize> = (0..baselines.human.len())
            .filter(|&i| members.iter().all(|(_, p)| p[i].is_some()))
            .collect();
        let mut vectors: Vec<(String, Vec<f64>)> = vec![
            ("humans".into(), keep.iter().map(|&i| baselines.human[i]).collect()),
            ("max-ev".into(), keep.iter().map(|&i| baselines.max_ev[i]).collect()),
        ];
        vectors.extend(
            members
                .into_iter()
                .map(|(label, p)| (label, keep.iter().map(|&i| p[i].unwrap_or(f64::NAN)).collect())),
        );
        tables.heatmaps.push(Heatmap {
            title: format!("{task} {style}"),
            matrix: correlation_matrix(&vectors, CorrelationKind::Spearman)?,
        });
    }
    for ((context, style), members) in inverse_groups {
        let mut vectors: Vec<(String, Vec<f64>)> = baselines
            .inverse
            .iter()
            .filter(|b| b.context.name() == context)
            .map(|b| (b.name.clone(), b.scores.clone()))
            .collect();
        vectors.extend(members);
        tables.heatmaps.push(Heatmap {
            title: format!("inverse {context} {style}"),
            matrix: correlation_matrix(&vectors, CorrelationKind::Spearman)?,
        });
    }
    Ok(tables)
}

fn forward_table(out: &mut String, title: &str, rows: &[ForwardRow]) {
    let _ = writeln!(out, "## {title}\n");
    let _ = writeln!(out, "| Model | Spearman | Pearson | MSE | n |");
    let _ = writeln!(out, "|---|---:|---:|---:|---:|");
    for r in rows {
        let m = &r.report;
        let _ = writeln!(out, "| {} | {:.4} | {:.4} | {:.4} | {} |", r.label, m.spearman, m.pearson, m.mse, m.n);
    }
    out.push('\n');
}

impl Tables {
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        forward_table(&mut out, "Forward predictions vs humans", &self.vs_humans);
        forward_table(&mut out, "Forward predictions vs max-EV", &self.vs_max_ev);

        let _ = writeln!(out, "## Inverse rankings\n");
        let _ = writeln!(out, "| Agent | Context | Style | Baseline | Spearman | Pearson |");
        let _ = writeln!(out, "|---|---|---|---|---:|---:|");
        for r in &self.inverse {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {:.4} | {:.4} |",
                r.agent, r.context, r.style, r.baseline, r.spearman, r.pearson
            );
        }
        out.push('\n');

        for h in &self.heatmaps {
            let _ = writeln!(out, "## Spearman matrix: {}\n", h.title);
            let _ = writeln!(out, "| | {} |", h.matrix.names.join(" | "));
            let _ = writeln!(out, "|---|{}", "---:|".repeat(h.matrix.names.len()));
            for (name, row) in h.matrix.names.iter().zip(&h.matrix.values) {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:.3}")).collect();
                let _ = writeln!(out, "| {name} | {} |", cells.join(" | "));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;
    use crate::record::{ForwardAnswers, ForwardItem, RawResults};
    use choicekit_gateway::agent::{AgentResponse, ParseStatus};
    use choicekit_gateway::prompt::Task;

    fn record(agent: &str, ids: &[&str], props: &[f64]) -> RunRecord {
        let items: Vec<ForwardItem> = ids
            .iter()
            .zip(props)
            .map(|(id, &p)| ForwardItem {
                problem_id: id.to_string(),
                seed: 0,
                prompt_hash: String::new(),
                swapped: false,
                requested: 1,
                answers: Some(ForwardAnswers::Proportions(vec![AgentResponse {
                    raw: String::new(),
                    reprompt_raw: None,
                    verdict: Some(p),
                    status: ParseStatus::Parsed,
                }])),
                error: None,
            })
            .collect();
        let raw = RawResults::Forward {
            task: Task::PredictProportion,
            items,
        };
        RunRecord {
            config: ExperimentConfig::default(),
            agent: agent.into(),
            style: Style::ZeroShot,
            persona: None,
            temperature: 1.0,
            started_unix: 0,
            finished_unix: 0,
            complete: true,
            tally: raw.tally(),
            derived: raw.derive().unwrap(),
            raw,
        }
    }

    fn baselines() -> Baselines {
        Baselines {
            problem_ids: vec!["a".into(), "b".into(), "c".into(), "d".into()],
            human: vec![0.2, 0.6, 0.4, 0.9],
            max_ev: vec![0.0, 1.0, 0.5, 1.0],
            inverse: Vec::new(),
        }
    }

    #[test]
    fn agent_equal_to_humans_scores_perfectly() {
        let b = baselines();
        let r = record("copy", &["a", "b", "c", "d"], &b.human);
        let t = report(&[r], &b).unwrap();
        let row = &t.vs_humans[0].report;
        assert_eq!((row.spearman, row.pearson, row.mse), (1.0, 1.0, 0.0));
        assert_eq!(t.vs_max_ev[0].agent, "humans");
        assert_eq!(t.vs_max_ev[1].report, t.vs_max_ev[0].report);
        assert_eq!(t.heatmaps.len(), 1);
        assert_eq!(t.heatmaps[0].matrix.names.len(), 3);
    }

    #[test]
    fn misaligned_records_are_rejected() {
        let r = record("x", &["a", "b", "d", "c"], &[0.1, 0.2, 0.3, 0.4]);
        assert!(matches!(report(&[r], &baselines()), Err(HarnessError::Misaligned(_))));
    }

    #[test]
    fn markdown_is_reproducible() {
        let b = baselines();
        let r = record("m", &["a", "b", "c", "d"], &[0.1, 0.7, 0.3, 0.8]);
        let one = report(std::slice::from_ref(&r), &b).unwrap().to_markdown();
        let two = report(&[r], &b).unwrap().to_markdown();
        assert_eq!(one, two);
        assert!(one.contains("| Humans |"));
    }

    #[test]
    fn human_ranking_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        let rows: Vec<String> = catalog_47()
            .iter()
            .enumerate()
            .map(|(i, d)| format!("{},{}", d.notation(), i + 1))
            .collect();
        std::fs::write(&path, format!("decision,rank\n{}\n", rows.join("\n"))).unwrap();
        let s = load_human_ranking(&path).unwrap();
        assert_eq!(s[0], -1.0);
        assert_eq!(s[46], -47.0);
        std::fs::write(&path, "decision,rank\nx,1\n").unwrap();
        assert!(load_human_ranking(&path).is_err());
    }
}
