//! Behavioral choice models and their fitting.
//!
//! Eighteen families share one interface: [`predict_choice_prob`] maps a
//! problem to P(A). Value-based families compute a subjective value per
//! gamble (or, for regret, per pair) and pass the difference through a
//! logistic link with sensitivity `phi`. Heuristic families make a
//! lexical decision in {0, 0.5, 1} which is mixed with a coin flip at lapse
//! rate `epsilon`.
//!
//! [`fit_model`] minimizes mean squared error against target P(A) values with
//! seeded, restarted box-constrained simplex descent.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::choice::{ev_decision, ev_unchecked, ChoiceProblem, Gamble};
use crate::optim::{self, Bound, SimplexOptions};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BehavioralError {
    #[error("unknown model family `{0}`")]
    UnknownFamily(String),
    #[error("cannot fit an empty dataset")]
    EmptyDataset,
    #[error("target {value} for problem {index} outside [0, 1]")]
    BadTarget { index: usize, value: f64 },
    #[error("all {0} restarts diverged")]
    Diverged(usize),
    #[error("parameter `{name}` = {value} outside [{lo}, {hi}]")]
    OutOfBounds {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
}

/// Grouping used when reporting fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamilyGroup {
    Heuristic,
    Counterfactual,
    SubjectiveExpectedUtility,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    BetterThanAverage,
    Equiprobable,
    LowPayoffElimination,
    LowExpectedPayoffElimination,
    Probable,
    Minimax,
    Maximax,
    PriorityHeuristic,
    DisappointmentEv,
    DisappointmentEu,
    DisappointmentNoRescale,
    RegretEv,
    RegretEu,
    ExpectedValue,
    ExpectedUtility,
    ProspectTheory,
    TransferOfAttentionExchange,
    MixtureOfTheories,
}

impl ModelFamily {
    /// Every family, in report order.
    pub const ALL: [ModelFamily; 18] = [
        Self::BetterThanAverage,
        Self::Equiprobable,
        Self::LowPayoffElimination,
        Self::LowExpectedPayoffElimination,
        Self::Probable,
        Self::Minimax,
        Self::Maximax,
        Self::PriorityHeuristic,
        Self::DisappointmentEv,
        Self::DisappointmentEu,
        Self::DisappointmentNoRescale,
        Self::RegretEv,
        Self::RegretEu,
        Self::ExpectedValue,
        Self::ExpectedUtility,
        Self::ProspectTheory,
        Self::TransferOfAttentionExchange,
        Self::MixtureOfTheories,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Self::BetterThanAverage => "better-than-average",
            Self::Equiprobable => "equiprobable",
            Self::LowPayoffElimination => "low-payoff-elimination",
            Self::LowExpectedPayoffElimination => "low-expected-payoff-elimination",
            Self::Probable => "probable",
            Self::Minimax => "minimax",
            Self::Maximax => "maximax",
            Self::PriorityHeuristic => "priority-heuristic",
            Self::DisappointmentEv => "disappointment-ev",
            Self::DisappointmentEu => "disappointment-eu",
            Self::DisappointmentNoRescale => "disappointment-no-rescale",
            Self::RegretEv => "regret-ev",
            Self::RegretEu => "regret-eu",
            Self::ExpectedValue => "expected-value",
            Self::ExpectedUtility => "expected-utility",
            Self::ProspectTheory => "prospect-theory",
            Self::TransferOfAttentionExchange => "transfer-of-attention-exchange",
            Self::MixtureOfTheories => "mixture-of-theories",
        }
    }

    /// Human-readable name for report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Self::BetterThanAverage => "Better Than Average",
            Self::Equiprobable => "Equiprobable",
            Self::LowPayoffElimination => "Low Payoff Elimination",
            Self::LowExpectedPayoffElimination => "Low Expected Payoff Elimination",
            Self::Probable => "Probable",
            Self::Minimax => "Minimax",
            Self::Maximax => "Maximax",
            Self::PriorityHeuristic => "Priority Heuristic",
            Self::DisappointmentEv => "Disappointment Theory with EV",
            Self::DisappointmentEu => "Disappointment Theory with EU",
            Self::DisappointmentNoRescale => "Disappointment Theory Without Rescaling",
            Self::RegretEv => "Regret Theory with EV",
            Self::RegretEu => "Regret Theory with EU",
            Self::ExpectedValue => "Expected Value",
            Self::ExpectedUtility => "Expected Utility",
            Self::ProspectTheory => "Prospect Theory",
            Self::TransferOfAttentionExchange => "Transfer of Attention Exchange",
            Self::MixtureOfTheories => "Mixture of Theories",
        }
    }

    pub fn group(self) -> FamilyGroup {
        use ModelFamily::*;
        match self {
            BetterThanAverage | Equiprobable | LowPayoffElimination
            | LowExpectedPayoffElimination | Probable | Minimax | Maximax | PriorityHeuristic => {
                FamilyGroup::Heuristic
            }
            DisappointmentEv | DisappointmentEu | DisappointmentNoRescale | RegretEv | RegretEu => {
                FamilyGroup::Counterfactual
            }
            _ => FamilyGroup::SubjectiveExpectedUtility,
        }
    }

    pub fn is_heuristic(self) -> bool {
        self.group() == FamilyGroup::Heuristic
    }

    /// Parameters this family fits, in fit-vector order.
    pub fn free_params(self) -> &'static [Param] {
        use ModelFamily::*;
        use Param::*;
        match self {
            BetterThanAverage | Equiprobable | Probable | Minimax | Maximax
            | PriorityHeuristic => &[Lapse],
            LowPayoffElimination | LowExpectedPayoffElimination => &[Threshold, Lapse],
            DisappointmentEv | DisappointmentNoRescale | RegretEv => {
                &[Counterfactual, Curvature, Sensitivity]
            }
            DisappointmentEu | RegretEu => {
                &[Alpha, Lambda, Counterfactual, Curvature, Sensitivity]
            }
            ExpectedValue => &[Sensitivity],
            ExpectedUtility => &[Alpha, Lambda, Sensitivity],
            ProspectTheory => &[Alpha, Lambda, Gamma, Sensitivity],
            TransferOfAttentionExchange => &[Alpha, Gamma, Transfer, Sensitivity],
            MixtureOfTheories => &[Alpha, Alpha2, Lambda, Gamma, Gamma2, Weight, Sensitivity],
        }
    }

    pub fn bounds(self) -> Vec<Bound> {
        self.free_params()
            .iter()
            .map(|p| p.bound_for(self))
            .collect()
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ModelFamily {
    type Err = BehavioralError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|f| f.id() == s)
            .ok_or_else(|| BehavioralError::UnknownFamily(s.to_string()))
    }
}

/// Names of the fields of [`ModelParams`] that fitting can move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Param {
    Alpha,
    Alpha2,
    Lambda,
    Gamma,
    Gamma2,
    Weight,
    Sensitivity,
    Lapse,
    Threshold,
    Transfer,
    Counterfactual,
    Curvature,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Self::Alpha => "alpha",
            Self::Alpha2 => "alpha2",
            Self::Lambda => "lambda",
            Self::Gamma => "gamma",
            Self::Gamma2 => "gamma2",
            Self::Weight => "weight",
            Self::Sensitivity => "phi",
            Self::Lapse => "epsilon",
            Self::Threshold => "threshold",
            Self::Transfer => "transfer",
            Self::Counterfactual => "delta",
            Self::Curvature => "kappa",
        }
    }

    pub fn bound_for(self, family: ModelFamily) -> Bound {
        match self {
            Self::Alpha | Self::Alpha2 => Bound::new(0.05, 2.0),
            Self::Lambda => Bound::new(0.1, 5.0),
            // The mixture uses a weighting family that is flat at zero.
            Self::Gamma | Self::Gamma2 if family == ModelFamily::MixtureOfTheories => {
                Bound::new(0.0, 2.0)
            }
            Self::Gamma | Self::Gamma2 => Bound::new(0.2, 2.0),
            Self::Weight | Self::Lapse => Bound::new(0.0, 1.0),
            Self::Sensitivity => Bound::new(1e-6, 20.0),
            Self::Threshold => Bound::new(-100.0, 100.0),
            Self::Transfer => Bound::new(-1.5, 1.5),
            Self::Counterfactual => Bound::new(-2.0, 2.0),
            Self::Curvature => Bound::new(0.2, 3.0),
        }
    }
}

/// Parameters for every family; each family reads only the fields it uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Utility curvature.
    pub alpha: f64,
    /// Second-component utility curvature (mixture only).
    pub alpha2: f64,
    /// Loss aversion.
    pub lambda: f64,
    /// Probability-weighting curvature.
    pub gamma: f64,
    /// Second-component weighting curvature (mixture only).
    pub gamma2: f64,
    /// Mixture weight on the first component.
    pub weight: f64,
    /// Logistic choice sensitivity.
    pub phi: f64,
    /// Lapse rate for heuristic families.
    pub epsilon: f64,
    /// Elimination threshold in dollars.
    pub threshold: f64,
    /// Attention transfer.
    pub transfer: f64,
    /// Disappointment / regret strength.
    pub delta: f64,
    /// Disappointment / regret curvature.
    pub kappa: f64,
}

impl Default for ModelParams {
    /// Identity parameters: every value-based family collapses to EV.
    fn default() -> Self {
        Self {
            alpha: 1.0,
            alpha2: 1.0,
            lambda: 1.0,
            gamma: 1.0,
            gamma2: 1.0,
            weight: 1.0,
            phi: 1.0,
            epsilon: 0.0,
            threshold: 0.0,
            transfer: 0.0,
            delta: 0.0,
            kappa: 1.0,
        }
    }
}

impl ModelParams {
    pub fn get(&self, p: Param) -> f64 {
        match p {
            Param::Alpha => self.alpha,
            Param::Alpha2 => self.alpha2,
            Param::Lambda => self.lambda,
            Param::Gamma => self.gamma,
            Param::Gamma2 => self.gamma2,
            Param::Weight => self.weight,
            Param::Sensitivity => self.phi,
            Param::Lapse => self.epsilon,
            Param::Threshold => self.threshold,
            Param::Transfer => self.transfer,
            Param::Counterfactual => self.delta,
            Param::Curvature => self.kappa,
        }
    }

    pub fn set(&mut self, p: Param, v: f64) {
        let slot = match p {
            Param::Alpha => &mut self.alpha,
            Param::Alpha2 => &mut self.alpha2,
            Param::Lambda => &mut self.lambda,
            Param::Gamma => &mut self.gamma,
            Param::Gamma2 => &mut self.gamma2,
            Param::Weight => &mut self.weight,
            Param::Sensitivity => &mut self.phi,
            Param::Lapse => &mut self.epsilon,
            Param::Threshold => &mut self.threshold,
            Param::Transfer => &mut self.transfer,
            Param::Counterfactual => &mut self.delta,
            Param::Curvature => &mut self.kappa,
        };
        *slot = v;
    }

    /// Parameters with the family's free values taken from `x`.
    pub fn from_vector(family: ModelFamily, x: &[f64]) -> Self {
        let mut out = Self::default();
        for (p, v) in family.free_params().iter().zip(x) {
            out.set(*p, *v);
        }
        out
    }

    pub fn to_vector(&self, family: ModelFamily) -> Vec<f64> {
        family.free_params().iter().map(|p| self.get(*p)).collect()
    }

    /// `(name, value)` for the family's free parameters.
    pub fn named(&self, family: ModelFamily) -> Vec<(&'static str, f64)> {
        family
            .free_params()
            .iter()
            .map(|p| (p.name(), self.get(*p)))
            .collect()
    }

    pub fn check_bounds(&self, family: ModelFamily) -> Result<(), BehavioralError> {
        for &p in family.free_params() {
            let b = p.bound_for(family);
            let v = self.get(p);
            if !b.contains(v) {
                return Err(BehavioralError::OutOfBounds {
                    name: p.name(),
                    value: v,
                    lo: b.lo,
                    hi: b.hi,
                });
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Functional forms
// ---------------------------------------------------------------------------

/// Power utility: x^α on gains, −λ(−x)^α on losses.
fn utility(x: f64, alpha: f64, lambda: f64) -> f64 {
    if x >= 0.0 {
        x.powf(alpha)
    } else {
        -lambda * (-x).powf(alpha)
    }
}

/// Inverse-S weighting q^γ / (q^γ + (1−q)^γ)^(1/γ).
fn tk_weight(q: f64, gamma: f64) -> f64 {
    let a = q.powf(gamma);
    a / (a + (1.0 - q).powf(gamma)).powf(1.0 / gamma)
}

/// Linear-in-log-odds weighting q^γ / (q^γ + (1−q)^γ); flat at γ = 0.
fn log_odds_weight(q: f64, gamma: f64) -> f64 {
    let a = q.powf(gamma);
    a / (a + (1.0 - q).powf(gamma))
}

fn expected_utility(g: &Gamble, alpha: f64, lambda: f64) -> f64 {
    g.outcomes().map(|(x, p)| p * utility(x, alpha, lambda)).sum()
}

fn prospect_value(g: &Gamble, alpha: f64, lambda: f64, gamma: f64) -> f64 {
    g.outcomes()
        .map(|(x, p)| tk_weight(p, gamma) * utility(x, alpha, lambda))
        .sum()
}

/// Weighted mean utility with weights renormalized to sum to one.
fn normalized_weight_value(g: &Gamble, alpha: f64, lambda: f64, gamma: f64) -> f64 {
    let (num, den) = g.outcomes().fold((0.0, 0.0), |(n, d), (x, p)| {
        let w = log_odds_weight(p, gamma);
        (n + w * utility(x, alpha, lambda), d + w)
    });
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Special TAX: weight p^γ per outcome, with a fraction δ/(n+1) of each
/// branch's weight moved to every lower-ranked branch (upward when δ < 0).
fn tax_value(g: &Gamble, alpha: f64, gamma: f64, delta: f64) -> f64 {
    let mut outs: Vec<(f64, f64)> = g
        .outcomes()
        .filter(|&(_, p)| p > 0.0)
        .map(|(x, p)| (utility(x, alpha, 1.0), p.powf(gamma)))
        .collect();
    // best first
    outs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let n = outs.len() as f64;
    let mut num: f64 = outs.iter().map(|(u, t)| t * u).sum();
    let den: f64 = outs.iter().map(|(_, t)| t).sum();
    for i in 0..outs.len() {
        for j in (i + 1)..outs.len() {
            let (ui, ti) = outs[i];
            let (uj, tj) = outs[j];
            let omega = if delta >= 0.0 {
                delta * ti / (n + 1.0)
            } else {
                delta * tj / (n + 1.0)
            };
            num += (uj - ui) * omega;
        }
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Odd power transform s·sign(z)·|z/s|^κ.
fn odd_power(z: f64, kappa: f64, scale: f64) -> f64 {
    scale * z.signum() * (z.abs() / scale).powf(kappa)
}

fn payoff_scale<'a>(gambles: impl IntoIterator<Item = &'a Gamble>) -> f64 {
    gambles
        .into_iter()
        .flat_map(|g| g.payoffs.iter())
        .fold(1.0f64, |m, x| m.max(x.abs()))
}

/// Base utility plus disappointment/elation relative to the gamble's own
/// expected utility. With `rescale`, deviations are measured in units of the
/// gamble's largest absolute payoff.
fn disappointment_value(g: &Gamble, alpha: f64, lambda: f64, params: &ModelParams, rescale: bool) -> f64 {
    let utils: Vec<(f64, f64)> = g
        .outcomes()
        .map(|(x, p)| (utility(x, alpha, lambda), p))
        .collect();
    let reference: f64 = utils.iter().map(|(u, p)| u * p).sum();
    let scale = if rescale {
        utils.iter().fold(1.0f64, |m, (u, _)| m.max(u.abs()))
    } else {
        1.0
    };
    let extra: f64 = utils
        .iter()
        .map(|&(u, p)| p * odd_power(u - reference, params.kappa, scale))
        .sum();
    reference + params.delta * extra
}

/// Σ_i Σ_j p_i q_j ψ(u(x_i) − u(y_j)) with ψ(ξ) = ξ + δ·s·sign(ξ)|ξ/s|^κ,
/// outcomes of the two gambles treated as independent.
fn regret_advantage(a: &Gamble, b: &Gamble, alpha: f64, lambda: f64, params: &ModelParams) -> f64 {
    let scale = payoff_scale([a, b]).powf(alpha).max(1.0);
    let mut total = 0.0;
    for (x, p) in a.outcomes() {
        let ux = utility(x, alpha, lambda);
        for (y, q) in b.outcomes() {
            let xi = ux - utility(y, alpha, lambda);
            total += p * q * (xi + params.delta * odd_power(xi, params.kappa, scale));
        }
    }
    total
}

/// Subjective value of one gamble under a family.
///
/// Regret families compare gambles pairwise; their single-gamble value is the
/// underlying expected value / utility. Heuristic families return the
/// statistic their rule compares where one exists (minimum, maximum,
/// unweighted mean, mean of probable outcomes) and EV otherwise.
pub fn model_value(family: ModelFamily, params: &ModelParams, g: &Gamble) -> f64 {
    use ModelFamily::*;
    let p = params;
    match family {
        ExpectedValue | BetterThanAverage | LowPayoffElimination
        | LowExpectedPayoffElimination | PriorityHeuristic | RegretEv => ev_unchecked(g),
        ExpectedUtility | RegretEu => expected_utility(g, p.alpha, p.lambda),
        ProspectTheory => prospect_value(g, p.alpha, p.lambda, p.gamma),
        TransferOfAttentionExchange => tax_value(g, p.alpha, p.gamma, p.transfer),
        MixtureOfTheories => {
            p.weight * normalized_weight_value(g, p.alpha, p.lambda, p.gamma)
                + (1.0 - p.weight) * normalized_weight_value(g, p.alpha2, p.lambda, p.gamma2)
        }
        DisappointmentEv => disappointment_value(g, 1.0, 1.0, p, true),
        DisappointmentEu => disappointment_value(g, p.alpha, p.lambda, p, true),
        DisappointmentNoRescale => disappointment_value(g, 1.0, 1.0, p, false),
        Minimax => g.min_payoff(),
        Maximax => g.max_payoff(),
        Equiprobable => g.payoffs.iter().sum::<f64>() / g.len() as f64,
        Probable => probable_mean(g),
    }
}

fn probable_mean(g: &Gamble) -> f64 {
    let cutoff = 1.0 / g.len() as f64;
    let (sum, count) = g
        .outcomes()
        .filter(|&(_, p)| p >= cutoff - 1e-12)
        .fold((0.0, 0usize), |(s, c), (x, _)| (s + x, c + 1));
    if count == 0 {
        g.payoffs.iter().sum::<f64>() / g.len() as f64
    } else {
        sum / count as f64
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn compare(a: f64, b: f64) -> f64 {
    ev_decision(a, b)
}

/// Lexical decision of a heuristic family: 1 = A, 0 = B, 0.5 = indifferent.
fn heuristic_decision(family: ModelFamily, params: &ModelParams, a: &Gamble, b: &Gamble) -> f64 {
    use ModelFamily::*;
    match family {
        Minimax | Maximax | Equiprobable | Probable => {
            compare(model_value(family, params, a), model_value(family, params, b))
        }
        BetterThanAverage => {
            let all: Vec<f64> = a.payoffs.iter().chain(&b.payoffs).copied().collect();
            let mean = all.iter().sum::<f64>() / all.len() as f64;
            let above = |g: &Gamble| g.payoffs.iter().filter(|&&x| x > mean).count() as f64;
            compare(above(a), above(b))
        }
        LowPayoffElimination => eliminate(a, b, params.threshold, Gamble::min_payoff),
        LowExpectedPayoffElimination => eliminate(a, b, params.threshold, expected_worst),
        PriorityHeuristic => priority_heuristic(a, b),
        _ => unreachable!("{family} is not a heuristic family"),
    }
}

/// Probability-weighted worst payoff.
fn expected_worst(g: &Gamble) -> f64 {
    let worst = g.min_payoff();
    let p: f64 = g.outcomes().filter(|&(x, _)| x == worst).map(|(_, p)| p).sum();
    worst * p
}

fn eliminate(a: &Gamble, b: &Gamble, threshold: f64, stat: impl Fn(&Gamble) -> f64) -> f64 {
    let drop_a = stat(a) < threshold;
    let drop_b = stat(b) < threshold;
    match (drop_a, drop_b) {
        (true, false) => 0.0,
        (false, true) => 1.0,
        _ => ev_decision(ev_unchecked(a), ev_unchecked(b)),
    }
}

/// Minimum outcome, then probability of the minimum, then maximum outcome.
fn priority_heuristic(a: &Gamble, b: &Gamble) -> f64 {
    let aspiration = 0.1 * payoff_scale_raw([a, b]);
    let (min_a, min_b) = (a.min_payoff(), b.min_payoff());
    let gap = (min_a - min_b).abs();
    if gap > 0.0 && gap >= aspiration {
        return compare(min_a, min_b);
    }
    let p_min = |g: &Gamble, m: f64| -> f64 {
        g.outcomes().filter(|&(x, _)| x == m).map(|(_, p)| p).sum()
    };
    let (pa, pb) = (p_min(a, min_a), p_min(b, min_b));
    if (pa - pb).abs() >= 0.1 {
        // lower chance of the worst outcome wins
        return compare(pb, pa);
    }
    compare(a.max_payoff(), b.max_payoff())
}

fn payoff_scale_raw<'a>(gambles: impl IntoIterator<Item = &'a Gamble>) -> f64 {
    gambles
        .into_iter()
        .flat_map(|g| g.payoffs.iter())
        .fold(0.0f64, |m, x| m.max(x.abs()))
}

/// P(choose A) under a family.
pub fn predict_choice_prob(family: ModelFamily, params: &ModelParams, p: &ChoiceProblem) -> f64 {
    use ModelFamily::*;
    let (a, b) = (&p.gamble_a, &p.gamble_b);
    if family.is_heuristic() {
        let d = heuristic_decision(family, params, a, b);
        return params.epsilon * 0.5 + (1.0 - params.epsilon) * d;
    }
    let advantage = match family {
        RegretEv => regret_advantage(a, b, 1.0, 1.0, params),
        RegretEu => regret_advantage(a, b, params.alpha, params.lambda, params),
        _ => model_value(family, params, a) - model_value(family, params, b),
    };
    logistic(params.phi * advantage)
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub family: ModelFamily,
    pub params: ModelParams,
    pub mse: f64,
    pub restarts: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn named_params(&self) -> Vec<(&'static str, f64)> {
        self.params.named(self.family)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub restarts: usize,
    pub seed: u64,
    pub simplex: SimplexOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 20,
            seed: 0,
            simplex: SimplexOptions::default(),
        }
    }
}

/// Mean squared error of a family's predictions against targets.
pub fn objective(family: ModelFamily, params: &ModelParams, data: &[(ChoiceProblem, f64)]) -> f64 {
    let sse: f64 = data
        .iter()
        .map(|(p, t)| {
            let e = predict_choice_prob(family, params, p) - t;
            e * e
        })
        .sum();
    sse / data.len() as f64
}

/// One restart: a seeded uniform start in the box, then simplex descent.
#[derive(Debug, Clone)]
struct RestartOutcome {
    restart: usize,
    start_mse: f64,
    x: Vec<f64>,
    mse: f64,
    converged: bool,
}

/// Fits a family to `(problem, target P(A))` pairs by MSE minimization.
pub fn fit_model(
    family: ModelFamily,
    data: &[(ChoiceProblem, f64)],
    opts: &FitOptions,
) -> Result<FitResult, BehavioralError> {
    if data.is_empty() {
        return Err(BehavioralError::EmptyDataset);
    }
    if let Some((index, (_, value))) = data
        .iter()
        .enumerate()
        .find(|(_, (_, t))| !(0.0..=1.0).contains(t))
    {
        return Err(BehavioralError::BadTarget {
            index,
            value: *value,
        });
    }
    let restarts = opts.restarts.max(1);
    let bounds = family.bounds();
    let f = |x: &[f64]| objective(family, &ModelParams::from_vector(family, x), data);

    let outcomes: Vec<RestartOutcome> = (0..restarts)
        .into_par_iter()
        .map(|restart| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(restart as u64);
            let x0: Vec<f64> = bounds.iter().map(|b| rng.random_range(b.lo..=b.hi)).collect();
            let start_mse = f(&x0);
            let m = optim::minimize(f, &x0, &bounds, &opts.simplex);
            RestartOutcome {
                restart,
                start_mse,
                x: m.x,
                mse: m.value,
                converged: m.converged,
            }
        })
        .collect();

    let best = outcomes
        .iter()
        .filter(|o| o.mse.is_finite())
        .min_by(|a, b| a.mse.total_cmp(&b.mse).then(a.restart.cmp(&b.restart)))
        .ok_or(BehavioralError::Diverged(restarts))?;
    debug_assert!(outcomes.iter().all(|o| best.mse <= o.start_mse));
    Ok(FitResult {
        family,
        params: ModelParams::from_vector(family, &best.x),
        mse: best.mse,
        restarts,
        converged: best.converged,
    })
}

/// One row of a model comparison; failed fits keep their error.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub family: ModelFamily,
    pub fit: Result<FitResult, BehavioralError>,
}

/// Fits every family, in report order.
pub fn model_comparison(data: &[(ChoiceProblem, f64)], opts: &FitOptions) -> Vec<ComparisonRow> {
    ModelFamily::ALL
        .par_iter()
        .map(|&family| ComparisonRow {
            family,
            fit: fit_model(family, data, opts),
        })
        .collect()
}

/// Record-file line for a fitted family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub family: ModelFamily,
    pub params: Vec<(String, f64)>,
    pub mse: Option<f64>,
    pub error: Option<String>,
}

impl From<&ComparisonRow> for FitRecord {
    fn from(row: &ComparisonRow) -> Self {
        match &row.fit {
            Ok(fit) => Self {
                family: row.family,
                params: fit
                    .named_params()
                    .into_iter()
                    .map(|(n, v)| (n.to_string(), v))
                    .collect(),
                mse: Some(fit.mse),
                error: None,
            },
            Err(e) => Self {
                family: row.family,
                params: Vec::new(),
                mse: None,
                error: Some(e.to_string()),
            },
        }
    }
}

/// Human-readable table grouped heuristic / counterfactual / SEU.
pub fn format_comparison_table(rows: &[ComparisonRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<40} {:>10}\n", "Behavioral Model", "MSE"));
    let mut last_group = None;
    for row in rows {
        let group = row.family.group();
        if last_group != Some(group) {
            out.push_str(&format!("{}\n", "-".repeat(51)));
            last_group = Some(group);
        }
        let mse = match &row.fit {
            Ok(fit) => format!("{:.5}", fit.mse),
            Err(e) => format!("error: {e}"),
        };
        out.push_str(&format!("{:<40} {:>10}\n", row.family.display_name(), mse));
    }
    out.push_str(&format!("{}\n", "-".repeat(51)));
    out
}
