//! Risky-choice modelling and preference-inference toolkit.
//!
//! * [`choice`]: gambles, problems, the max-EV baseline, dataset ingestion.
//! * [`behavioral`]: eighteen behavioral model families and their fitting.
//! * [`inverse`]: Luce-rule inverse inference over the 47-decision catalog.
//! * [`metrics`]: pairwise aggregation and rank statistics.

pub mod behavioral;
pub mod choice;
pub mod fixtures;
pub mod inverse;
pub mod metrics;
pub mod optim;

pub use behavioral::{fit_model, model_comparison, predict_choice_prob, FitOptions, FitResult, ModelFamily, ModelParams};
pub use choice::{
    expected_value, filter_experiment_subset, load_choices13k, max_ev_prediction, ChoiceObservation, ChoiceProblem,
    ChoiceRecord, Dataset, Gamble,
};
pub use inverse::{
    catalog_47, luce_choice_prob, rank_decisions, score_grid, score_mc, Context, DecisionStructure, PreferenceScore,
    PriorSpec, ScoreKind,
};
pub use metrics::{aggregate_pairwise, pearson, spearman, CorrelationReport, Ranking};
