//! Behavioral-model comparison against human or agent P(A) vectors.

use serde::{Deserialize, Serialize};

use choicekit_core::behavioral::{format_comparison_table, model_comparison, FitOptions, FitRecord};
use choicekit_core::choice::{ChoiceProblem, Dataset};

use crate::record::RunRecord;
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// `humans` or the label of the target record.
    pub target: String,
    pub n_problems: usize,
    pub fits: Vec<FitRecord>,
    pub table: String,
}

/// Pairs each problem with the target probability; problems the agent
/// never answered are dropped.
pub fn fit_data(dataset: &Dataset, target: Option<&RunRecord>) -> Result<Vec<(ChoiceProblem, f64)>, HarnessError> {
    match target {
        None => Ok(dataset
            .records
            .iter()
            .map(|r| (r.problem.clone(), r.observation.prop_a))
            .collect()),
        Some(rec) => {
            let fwd = rec
                .forward()
                .ok_or_else(|| HarnessError::Config(format!("{} is not a forward record", rec.label())))?;
            fwd.problem_ids
                .iter()
                .zip(&fwd.p_a)
                .filter_map(|(id, p)| p.map(|p| (id, p)))
                .map(|(id, p)| {
                    dataset
                        .get(id)
                        .map(|r| (r.problem.clone(), p))
                        .ok_or_else(|| HarnessError::Misaligned(format!("problem `{id}` is not in the dataset")))
                })
                .collect()
        }
    }
}

pub fn run_fit(dataset: &Dataset, target: Option<&RunRecord>, opts: &FitOptions) -> Result<FitReport, HarnessError> {
    let data = fit_data(dataset, target)?;
    if data.is_empty() {
        return Err(HarnessError::Config("nothing to fit".into()));
    }
    let rows = model_comparison(&data, opts);
    Ok(FitReport {
        target: target.map_or_else(|| "humans".to_string(), RunRecord::label),
        n_problems: data.len(),
        fits: rows.iter().map(FitRecord::from).collect(),
        table: format_comparison_table(&rows),
    })
}
