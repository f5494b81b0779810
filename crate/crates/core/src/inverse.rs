//! Inverse decision-making over five items `A, B, C, D, X`.
//!
//! An observer sees a chooser pick one option (a set of items) from several.
//! The chooser follows the Luce rule: option `j` is picked with probability
//! proportional to `exp(β·U_j)`, where `U_j` is the sum of its item
//! utilities. Inverting that rule under an iid uniform prior on item
//! utilities yields four measures of how strongly the choice suggests the
//! chooser values `X`:
//!
//! * **absolute**: posterior mean of `u_X`;
//! * **relative**: posterior probability that `u_X` is the largest utility;
//! * **likelihood**: mean choice probability over the region where `u_X` is
//!   largest;
//! * **marginal**: reciprocal of the prior-averaged choice probability.
//!
//! [`score_grid`] evaluates these by midpoint quadrature on a tensor grid and
//! is the reference. [`score_mc`] is a self-normalized importance estimator
//! with jackknife standard errors.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::Ranking;

pub const N_ITEMS: usize = 5;
/// Smallest Monte Carlo sample accepted by [`score_mc`].
pub const MC_MIN_SAMPLES: usize = 1000;
pub const GRID_MIN_POINTS: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum InverseError {
    #[error("decision has no options")]
    NoOptions,
    #[error("decision has {0} options; at most 5 allowed")]
    TooManyOptions(usize),
    #[error("option {0} is empty")]
    EmptyOption(usize),
    #[error("item `{item}` repeated in option {option}")]
    RepeatedItem { option: usize, item: char },
    #[error("unknown item `{0}`")]
    UnknownItem(char),
    #[error("chosen index {chosen} out of range for {n} options")]
    ChosenOutOfRange { chosen: usize, n: usize },
    #[error("{got} Monte Carlo samples requested; at least {MC_MIN_SAMPLES} required")]
    TooFewSamples { got: usize },
    #[error("{got} grid points per dimension; at least {GRID_MIN_POINTS} required")]
    GridTooCoarse { got: usize },
    #[error("scores of different kinds cannot be ranked together ({0} vs {1})")]
    MixedKinds(ScoreKind, ScoreKind),
    #[error("sensitivity must be finite and non-negative, got {0}")]
    BadBeta(f64),
    #[error("zero total posterior weight")]
    ZeroWeight,
    #[error("catalog row {row}: {message}")]
    CatalogRow { row: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Item {
    A,
    B,
    C,
    D,
    X,
}

impl Item {
    pub const ALL: [Item; N_ITEMS] = [Item::A, Item::B, Item::C, Item::D, Item::X];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        b"abcdx"[self.index()] as char
    }

    pub fn from_letter(c: char) -> Result<Self, InverseError> {
        match c.to_ascii_lowercase() {
            'a' => Ok(Item::A),
            'b' => Ok(Item::B),
            'c' => Ok(Item::C),
            'd' => Ok(Item::D),
            'x' => Ok(Item::X),
            _ => Err(InverseError::UnknownItem(c)),
        }
    }
}

pub const TARGET: Item = Item::X;

/// An ordered set of distinct items; order is kept for display only.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ItemSet(Vec<Item>);

impl ItemSet {
    pub fn new(items: Vec<Item>) -> Self {
        Self(items)
    }

    pub fn items(&self) -> &[Item] {
        &self.0
    }

    pub fn contains(&self, item: Item) -> bool {
        self.0.contains(&item)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn mask(&self) -> u8 {
        self.0.iter().fold(0, |m, i| m | (1 << i.index()))
    }

    fn utility(&self, u: &[f64; N_ITEMS]) -> f64 {
        self.0.iter().map(|i| u[i.index()]).sum()
    }
}

impl fmt::Display for ItemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in &self.0 {
            write!(f, "{}", i.letter())?;
        }
        Ok(())
    }
}

/// Options offered to the chooser and the index of the one taken.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DecisionStructure {
    pub options: Vec<ItemSet>,
    pub chosen: usize,
}

impl DecisionStructure {
    pub fn new(options: Vec<ItemSet>, chosen: usize) -> Result<Self, InverseError> {
        let d = Self { options, chosen };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), InverseError> {
        if self.options.is_empty() {
            return Err(InverseError::NoOptions);
        }
        if self.options.len() > N_ITEMS {
            return Err(InverseError::TooManyOptions(self.options.len()));
        }
        for (k, o) in self.options.iter().enumerate() {
            if o.is_empty() {
                return Err(InverseError::EmptyOption(k));
            }
            let mut seen = 0u8;
            for i in o.items() {
                if seen & (1 << i.index()) != 0 {
                    return Err(InverseError::RepeatedItem {
                        option: k,
                        item: i.letter(),
                    });
                }
                seen |= 1 << i.index();
            }
        }
        if self.chosen >= self.options.len() {
            return Err(InverseError::ChosenOutOfRange {
                chosen: self.chosen,
                n: self.options.len(),
            });
        }
        Ok(())
    }

    pub fn chosen_option(&self) -> &ItemSet {
        &self.options[self.chosen]
    }

    /// The decision with non-target items renamed by `map` (indexed by item).
    pub fn relabeled(&self, map: &[Item; N_ITEMS]) -> Self {
        Self {
            options: self
                .options
                .iter()
                .map(|o| ItemSet(o.items().iter().map(|i| map[i.index()]).collect()))
                .collect(),
            chosen: self.chosen,
        }
    }

    /// Compact form: options separated by `|`, chosen option first.
    pub fn notation(&self) -> String {
        let mut parts = vec![self.chosen_option().to_string()];
        parts.extend(
            self.options
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != self.chosen)
                .map(|(_, o)| o.to_string()),
        );
        parts.join("|")
    }

    /// Order-free form: items sorted within options, chosen option first,
    /// the rest sorted. Presentation shuffles leave it unchanged.
    pub fn canonical(&self) -> Self {
        let sorted = |o: &ItemSet| {
            let mut items = o.items().to_vec();
            items.sort();
            ItemSet(items)
        };
        let mut rest: Vec<ItemSet> = self
            .options
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != self.chosen)
            .map(|(_, o)| sorted(o))
            .collect();
        rest.sort_by_key(|o| o.to_string());
        let mut options = vec![sorted(self.chosen_option())];
        options.extend(rest);
        Self { options, chosen: 0 }
    }

    fn masks(&self) -> Vec<u8> {
        self.options.iter().map(ItemSet::mask).collect()
    }
}

impl fmt::Display for DecisionStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.notation())
    }
}

impl FromStr for DecisionStructure {
    type Err = InverseError;

    /// Parses [`DecisionStructure::notation`]: `"ax|b|dc"`, chosen first.
    /// Commas and spaces inside an option are ignored.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let options = s
            .split('|')
            .map(|part| {
                part.chars()
                    .filter(|c| !c.is_whitespace() && *c != ',')
                    .map(Item::from_letter)
                    .collect::<Result<Vec<_>, _>>()
                    .map(ItemSet)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(options, 0)
    }
}

/// Choice probability of the chosen option under the Luce rule.
pub fn luce_choice_prob(u: &[f64; N_ITEMS], d: &DecisionStructure, beta: f64) -> f64 {
    let utils: Vec<f64> = d.options.iter().map(|o| beta * o.utility(u)).collect();
    softmax_at(&utils, d.chosen)
}

/// Probability of every option, in option order.
pub fn luce_distribution(u: &[f64; N_ITEMS], d: &DecisionStructure, beta: f64) -> Vec<f64> {
    let utils: Vec<f64> = d.options.iter().map(|o| beta * o.utility(u)).collect();
    let m = utils.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = utils.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

fn softmax_at(utils: &[f64], k: usize) -> f64 {
    let m = utils.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = utils.iter().map(|v| (v - m).exp()).sum();
    (utils[k] - m).exp() / z
}

/// Mask-based variant for the inner loops.
#[inline]
fn luce_masked(u: &[f64; N_ITEMS], masks: &[u8], chosen: usize, beta: f64) -> f64 {
    let mut utils = [0.0f64; N_ITEMS];
    for (k, &m) in masks.iter().enumerate() {
        let mut s = 0.0;
        for (i, ui) in u.iter().enumerate() {
            if m & (1 << i) != 0 {
                s += ui;
            }
        }
        utils[k] = beta * s;
    }
    softmax_at(&utils[..masks.len()], chosen)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Context {
    /// Items are desirable (candies).
    Positive,
    /// Items are aversive (shocks).
    Negative,
}

impl Context {
    pub const ALL: [Context; 2] = [Context::Positive, Context::Negative];

    pub fn name(self) -> &'static str {
        match self {
            Self::Positive => "positive",
            Self::Negative => "negative",
        }
    }
}

impl FromStr for Context {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "positive" => Ok(Self::Positive),
            "negative" => Ok(Self::Negative),
            _ => Err(format!("unknown context `{s}`")),
        }
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Iid uniform prior on item utilities: (0, 1] or [-1, 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub context: Context,
    /// Luce sensitivity.
    pub beta: f64,
}

impl PriorSpec {
    pub fn new(context: Context) -> Self {
        Self { context, beta: 1.0 }
    }

    pub fn with_beta(self, beta: f64) -> Self {
        Self { beta, ..self }
    }

    /// Maps a unit draw `v ∈ [0, 1)` into the support.
    fn utility_at(&self, v: f64) -> f64 {
        match self.context {
            Context::Positive => 1.0 - v,
            Context::Negative => v - 1.0,
        }
    }

    fn check(&self) -> Result<(), InverseError> {
        if self.beta.is_finite() && self.beta >= 0.0 {
            Ok(())
        } else {
            Err(InverseError::BadBeta(self.beta))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Absolute,
    Relative,
    Likelihood,
    Marginal,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 4] = [
        ScoreKind::Absolute,
        ScoreKind::Relative,
        ScoreKind::Likelihood,
        ScoreKind::Marginal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Absolute => "absolute",
            Self::Relative => "relative",
            Self::Likelihood => "likelihood",
            Self::Marginal => "marginal",
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown score kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceScore {
    pub decision: String,
    pub kind: ScoreKind,
    pub value: f64,
    /// Jackknife standard error; Monte Carlo scores only.
    pub std_error: Option<f64>,
}

/// All four scores for one decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub absolute: f64,
    pub relative: f64,
    pub likelihood: f64,
    pub marginal: f64,
}

impl ScoreSet {
    pub fn get(&self, kind: ScoreKind) -> f64 {
        match kind {
            ScoreKind::Absolute => self.absolute,
            ScoreKind::Relative => self.relative,
            ScoreKind::Likelihood => self.likelihood,
            ScoreKind::Marginal => self.marginal,
        }
    }
}

/// Share of the "X is largest" event at `u`: 1 if X is the unique maximum,
/// 1/k if X ties with k−1 others at the maximum, else 0.
#[inline]
fn target_max_share(u: &[f64; N_ITEMS]) -> f64 {
    let ux = u[TARGET.index()];
    let mut ties = 1u32;
    for (i, &v) in u.iter().enumerate() {
        if i == TARGET.index() {
            continue;
        }
        if v > ux {
            return 0.0;
        }
        if v == ux {
            ties += 1;
        }
    }
    1.0 / f64::from(ties)
}

/// All four scores by midpoint quadrature with `points` nodes per item.
///
/// On a grid, utilities tie with positive mass; a tied maximum credits X
/// with its fractional share so the grid agrees with the continuous prior.
pub fn score_grid_all(d: &DecisionStructure, prior: &PriorSpec, points: usize) -> Result<ScoreSet, InverseError> {
    d.validate()?;
    prior.check()?;
    if points < GRID_MIN_POINTS {
        return Err(InverseError::GridTooCoarse { got: points });
    }
    let nodes: Vec<f64> = (0..points)
        .map(|k| prior.utility_at((k as f64 + 0.5) / points as f64))
        .collect();
    let masks = d.masks();
    let total = points.pow(N_ITEMS as u32);
    // sums of w, w·u_x, w·share, share
    let sums = (0..total)
        .into_par_iter()
        .fold(
            || [0.0f64; 4],
            |mut acc, mut flat| {
                let mut u = [0.0; N_ITEMS];
                for ui in u.iter_mut() {
                    *ui = nodes[flat % points];
                    flat /= points;
                }
                let w = luce_masked(&u, &masks, d.chosen, prior.beta);
                let share = target_max_share(&u);
                acc[0] += w;
                acc[1] += w * u[TARGET.index()];
                acc[2] += w * share;
                acc[3] += share;
                acc
            },
        )
        .reduce(
            || [0.0; 4],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let [sw, swx, sws, ss] = sums;
    if sw <= 0.0 {
        return Err(InverseError::ZeroWeight);
    }
    Ok(ScoreSet {
        absolute: swx / sw,
        relative: sws / sw,
        likelihood: sws / ss,
        marginal: total as f64 / sw,
    })
}

pub fn score_grid(
    d: &DecisionStructure,
    prior: &PriorSpec,
    kind: ScoreKind,
    points: usize,
) -> Result<PreferenceScore, InverseError> {
    let s = score_grid_all(d, prior, points)?;
    Ok(PreferenceScore {
        decision: d.notation(),
        kind,
        value: s.get(kind),
        std_error: None,
    })
}

/// Ratio estimate `Σa / Σb` and its delete-one jackknife standard error.
fn jackknife_ratio(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len();
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    let est = sa / sb;
    let loo: Vec<f64> = a.iter().zip(b).map(|(ai, bi)| (sa - ai) / (sb - bi)).collect();
    let mean = loo.iter().sum::<f64>() / n as f64;
    let var = loo.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() * (n as f64 - 1.0) / n as f64;
    (est, var.sqrt())
}

/// Monte Carlo estimates and standard errors for all four kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McScores {
    pub values: ScoreSet,
    pub std_errors: ScoreSet,
}

pub fn score_mc_all(
    d: &DecisionStructure,
    prior: &PriorSpec,
    n_samples: usize,
    seed: u64,
) -> Result<McScores, InverseError> {
    d.validate()?;
    prior.check()?;
    if n_samples < MC_MIN_SAMPLES {
        return Err(InverseError::TooFewSamples { got: n_samples });
    }
    let masks = d.masks();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = Vec::with_capacity(n_samples);
    let mut wx = Vec::with_capacity(n_samples);
    let mut w_max = Vec::with_capacity(n_samples);
    let mut is_max = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let mut u = [0.0; N_ITEMS];
        for ui in u.iter_mut() {
            *ui = prior.utility_at(rng.random::<f64>());
        }
        let wi = luce_masked(&u, &masks, d.chosen, prior.beta);
        // ties have probability zero under the continuous prior
        let m = if target_max_share(&u) == 1.0 { 1.0 } else { 0.0 };
        w.push(wi);
        wx.push(wi * u[TARGET.index()]);
        w_max.push(wi * m);
        is_max.push(m);
    }
    let ones = vec![1.0; n_samples];
    let (absolute, se_abs) = jackknife_ratio(&wx, &w);
    let (relative, se_rel) = jackknife_ratio(&w_max, &w);
    let (likelihood, se_lik) = jackknife_ratio(&w_max, &is_max);
    let (marginal, se_mar) = jackknife_ratio(&ones, &w);
    Ok(McScores {
        values: ScoreSet {
            absolute,
            relative,
            likelihood,
            marginal,
        },
        std_errors: ScoreSet {
            absolute: se_abs,
            relative: se_rel,
            likelihood: se_lik,
            marginal: se_mar,
        },
    })
}

pub fn score_mc(
    d: &DecisionStructure,
    prior: &PriorSpec,
    kind: ScoreKind,
    n_samples: usize,
    seed: u64,
) -> Result<PreferenceScore, InverseError> {
    let s = score_mc_all(d, prior, n_samples, seed)?;
    Ok(PreferenceScore {
        decision: d.notation(),
        kind,
        value: s.values.get(kind),
        std_error: Some(s.std_errors.get(kind)),
    })
}

/// Seed for decision `index` of a batch, independent of scheduling.
pub fn decision_seed(base: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index as u64 + 1);
    rng.random()
}

/// Grid scores for a list of decisions, in parallel.
pub fn score_grid_batch(
    decisions: &[DecisionStructure],
    prior: &PriorSpec,
    points: usize,
) -> Result<Vec<ScoreSet>, InverseError> {
    decisions
        .par_iter()
        .map(|d| score_grid_all(d, prior, points))
        .collect()
}

/// Monte Carlo scores for a list of decisions with per-decision seeds.
pub fn score_mc_batch(
    decisions: &[DecisionStructure],
    prior: &PriorSpec,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<McScores>, InverseError> {
    decisions
        .par_iter()
        .enumerate()
        .map(|(i, d)| score_mc_all(d, prior, n_samples, decision_seed(seed, i)))
        .collect()
}

/// Descending ranking with midrank ties.
pub fn rank_decisions(scores: &[PreferenceScore]) -> Result<Ranking, InverseError> {
    if let Some(first) = scores.first() {
        if let Some(other) = scores.iter().find(|s| s.kind != first.kind) {
            return Err(InverseError::MixedKinds(first.kind, other.kind));
        }
    }
    Ok(Ranking::from_scores(scores.iter().map(|s| s.value).collect()))
}

const CATALOG: [&str; 47] = [
    "dcbax",
    "cbax",
    "bax",
    "ax",
    "x",
    "cbax|dbax",
    "ax|bx|cx|dx",
    "bax|cax",
    "bax|bcx|bdx",
    "bax|dcx",
    "ax|bx",
    "bax|cax|bdx",
    "ax|bx|cx",
    "cbax|d",
    "bax|c",
    "ax|b",
    "bax|c|d",
    "bax|dc",
    "ax|b|c",
    "ax|bx|dc",
    "bax|bdc",
    "ax|bx|cx|ad",
    "ax|b|c|d",
    "bax|bcx|bad",
    "ax|bx|ac",
    "ax|cb",
    "cbax|cbad",
    "ax|b|dc",
    "ax|bx|ac|ad",
    "ax|ab",
    "bax|bac",
    "ax|ab|dc",
    "ax|dcb",
    "x|a",
    "bax|bac|bad",
    "ax|ab|ac",
    "ax|ab|ac|ad",
    "x|a|b",
    "x|a|b|c",
    "x|a|cb",
    "x|ba",
    "x|a|b|c|d",
    "x|cba",
    "x|ba|dc",
    "x|a|b|dc",
    "x|a|dcb",
    "x|dcba",
];

/// The 47 observed decisions; the chosen option is always the first.
pub fn catalog_47() -> Vec<DecisionStructure> {
    CATALOG
        .iter()
        .map(|s| s.parse().expect("catalog entries are well formed"))
        .collect()
}

/// Index of a decision in [`catalog_47`] by notation.
pub fn catalog_index(notation: &str) -> Option<usize> {
    CATALOG.iter().position(|s| *s == notation)
}

/// Writes `id,option1..option5,chosen` rows; ids start at 1.
pub fn write_catalog<W: Write>(decisions: &[DecisionStructure], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "option1", "option2", "option3", "option4", "option5", "chosen"])?;
    for (i, d) in decisions.iter().enumerate() {
        let mut row = vec![(i + 1).to_string()];
        for k in 0..N_ITEMS {
            row.push(d.options.get(k).map(ToString::to_string).unwrap_or_default());
        }
        row.push(d.chosen.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_catalog<R: Read>(input: R) -> Result<Vec<DecisionStructure>, InverseError> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let bad = |message: String| InverseError::CatalogRow { row: row + 1, message };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != 7 {
            return Err(bad(format!("expected 7 fields, got {}", rec.len())));
        }
        let options = (1..=N_ITEMS)
            .map(|k| &rec[k])
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                s.trim()
                    .chars()
                    .map(Item::from_letter)
                    .collect::<Result<Vec<_>, _>>()
                    .map(ItemSet)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let chosen: usize = rec[6].trim().parse().map_err(|_| bad(format!("bad chosen index `{}`", &rec[6])))?;
        out.push(DecisionStructure::new(options, chosen)?);
    }
    Ok(out)
}
