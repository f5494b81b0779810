//! Risky-choice problems, the expected-value baseline, and choices13k ingestion.
//!
//! A problem is a forced choice between two gambles; each gamble is a list of
//! signed dollar payoffs with matching probabilities. Records from the public
//! choices13k distribution are normalized at ingestion into that list form,
//! expanding the multi-outcome lotteries the source encodes as
//! `(LotShape, LotNum)` pairs.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Probabilities must sum to one within this tolerance.
pub const PROB_SUM_TOL: f64 = 1e-9;
/// Sums within this tolerance are renormalized (with a warning) at ingestion.
pub const PROB_RENORM_TOL: f64 = 1e-6;
/// Minimum participant count for a choices13k record.
pub const MIN_PARTICIPANTS: u32 = 15;

#[derive(Debug, Error, PartialEq)]
pub enum ValidationError {
    #[error("gamble has no outcomes")]
    Empty,
    #[error("gamble has {payoffs} payoffs but {probs} probabilities")]
    LengthMismatch { payoffs: usize, probs: usize },
    #[error("payoff {index} is not finite")]
    NonFinitePayoff { index: usize },
    #[error("probability {index} = {value} outside [0, 1]")]
    ProbOutOfRange { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, not 1")]
    Unnormalized { sum: f64 },
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("row {row}: {source}")]
    Invalid {
        row: usize,
        #[source]
        source: ValidationError,
    },
    #[error("duplicate problem id `{0}`")]
    DuplicateId(String),
}

/// A gamble: outcome `i` pays `payoffs[i]` dollars with probability `probs[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gamble {
    pub payoffs: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Gamble {
    /// Builds a validated gamble.
    pub fn new(payoffs: Vec<f64>, probs: Vec<f64>) -> Result<Self, ValidationError> {
        let g = Self { payoffs, probs };
        g.validate()?;
        Ok(g)
    }

    /// A gamble paying `payoff` for sure.
    pub fn certain(payoff: f64) -> Self {
        Self {
            payoffs: vec![payoff],
            probs: vec![1.0],
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        self.check_shape()?;
        let sum: f64 = self.probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(ValidationError::Unnormalized { sum });
        }
        Ok(())
    }

    fn check_shape(&self) -> Result<(), ValidationError> {
        if self.payoffs.is_empty() {
            return Err(ValidationError::Empty);
        }
        if self.payoffs.len() != self.probs.len() {
            return Err(ValidationError::LengthMismatch {
                payoffs: self.payoffs.len(),
                probs: self.probs.len(),
            });
        }
        if let Some(index) = self.payoffs.iter().position(|x| !x.is_finite()) {
            return Err(ValidationError::NonFinitePayoff { index });
        }
        if let Some(index) = self
            .probs
            .iter()
            .position(|p| !(0.0..=1.0).contains(p) || p.is_nan())
        {
            return Err(ValidationError::ProbOutOfRange {
                index,
                value: self.probs[index],
            });
        }
        Ok(())
    }

    /// Validates, renormalizing sums that are off by rounding only.
    /// Returns whether a renormalization happened.
    fn normalize_rounding(&mut self) -> Result<bool, ValidationError> {
        self.check_shape()?;
        let sum: f64 = self.probs.iter().sum();
        let off = (sum - 1.0).abs();
        if off <= PROB_SUM_TOL {
            Ok(false)
        } else if off <= PROB_RENORM_TOL {
            self.probs.iter_mut().for_each(|p| *p /= sum);
            Ok(true)
        } else {
            Err(ValidationError::Unnormalized { sum })
        }
    }

    pub fn len(&self) -> usize {
        self.payoffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payoffs.is_empty()
    }

    /// `(payoff, prob)` pairs.
    pub fn outcomes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.payoffs.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn min_payoff(&self) -> f64 {
        self.payoffs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_payoff(&self) -> f64 {
        self.payoffs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Returns a copy with every payoff multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            payoffs: self.payoffs.iter().map(|x| x * k).collect(),
            probs: self.probs.clone(),
        }
    }
}

/// Probability-weighted mean payoff.
pub fn expected_value(g: &Gamble) -> Result<f64, ValidationError> {
    g.validate()?;
    Ok(ev_unchecked(g))
}

pub(crate) fn ev_unchecked(g: &Gamble) -> f64 {
    g.outcomes().map(|(x, p)| x * p).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceProblem {
    pub id: String,
    pub gamble_a: Gamble,
    pub gamble_b: Gamble,
    #[serde(default)]
    pub ambiguous: bool,
    #[serde(default = "default_true")]
    pub feedback: bool,
}

fn default_true() -> bool {
    true
}

impl ChoiceProblem {
    pub fn new(id: impl Into<String>, gamble_a: Gamble, gamble_b: Gamble) -> Self {
        Self {
            id: id.into(),
            gamble_a,
            gamble_b,
            ambiguous: false,
            feedback: true,
        }
    }

    /// The same problem with the two gambles exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            id: self.id.clone(),
            gamble_a: self.gamble_b.clone(),
            gamble_b: self.gamble_a.clone(),
            ambiguous: self.ambiguous,
            feedback: self.feedback,
        }
    }
}

/// Aggregate human behaviour on one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceObservation {
    pub problem_id: String,
    /// Fraction of participant answers selecting gamble A.
    pub prop_a: f64,
    pub n_participants: u32,
}

/// Rational baseline: 1 if A has the higher EV, 0 if B does, 0.5 on an exact tie.
pub fn max_ev_prediction(p: &ChoiceProblem) -> Result<f64, ValidationError> {
    let ev_a = expected_value(&p.gamble_a)?;
    let ev_b = expected_value(&p.gamble_b)?;
    Ok(ev_decision(ev_a, ev_b))
}

pub fn ev_decision(ev_a: f64, ev_b: f64) -> f64 {
    if ev_a > ev_b {
        1.0
    } else if ev_a < ev_b {
        0.0
    } else {
        0.5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceRecord {
    pub problem: ChoiceProblem,
    pub observation: ChoiceObservation,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub records: Vec<ChoiceRecord>,
}

impl Dataset {
    pub fn new(records: Vec<ChoiceRecord>) -> Self {
        Self { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn problems(&self) -> impl Iterator<Item = &ChoiceProblem> {
        self.records.iter().map(|r| &r.problem)
    }

    /// Human P(A) per problem, in record order.
    pub fn human_props(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.observation.prop_a).collect()
    }

    /// Max-EV baseline per problem, in record order.
    pub fn max_ev_vector(&self) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| {
                ev_decision(
                    ev_unchecked(&r.problem.gamble_a),
                    ev_unchecked(&r.problem.gamble_b),
                )
            })
            .collect()
    }

    pub fn get(&self, id: &str) -> Option<&ChoiceRecord> {
        self.records.iter().find(|r| r.problem.id == id)
    }

    /// Keeps the first `n` records.
    pub fn truncated(&self, n: usize) -> Self {
        Self::new(self.records.iter().take(n).cloned().collect())
    }
}

/// Keeps exactly the non-ambiguous problems that were run with feedback.
pub fn filter_experiment_subset(dataset: &Dataset) -> Dataset {
    Dataset::new(
        dataset
            .records
            .iter()
            .filter(|r| !r.problem.ambiguous && r.problem.feedback)
            .cloned()
            .collect(),
    )
}

/// Loads a dataset. Files ending in `.jsonl` are read as canonical records
/// (see [`write_canonical`]); anything else as a choices13k selections table.
pub fn load_choices13k(path: impl AsRef<Path>) -> Result<Dataset, IngestError> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "jsonl") {
        return read_canonical(path);
    }
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_choices13k(&text)
}

const REQUIRED_COLUMNS: [&str; 10] = [
    "Ha", "pHa", "La", "Hb", "pHb", "Lb", "bRate", "n", "Amb", "Feedback",
];

/// Parses choices13k selections text (comma- or tab-delimited, with header).
pub fn parse_choices13k(text: &str) -> Result<Dataset, IngestError> {
    if text.trim().is_empty() {
        warn!("choices13k input is empty; returning an empty dataset");
        return Ok(Dataset::default());
    }
    let first_line = text.lines().next().unwrap_or_default();
    let delimiter = if first_line.contains('\t') { b'\t' } else { b',' };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| IngestError::Row {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    let column: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    for name in REQUIRED_COLUMNS {
        if !column.contains_key(name) {
            return Err(IngestError::MissingColumn(name.to_string()));
        }
    }

    let mut records = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut renormalized = 0usize;
    for (i, row) in reader.records().enumerate() {
        // 1-based data row numbering, header excluded
        let row_no = i + 1;
        let row = row.map_err(|e| IngestError::Row {
            row: row_no,
            message: e.to_string(),
        })?;
        let field = |name: &str| -> Option<&str> {
            column
                .get(name)
                .and_then(|&c| row.get(c))
                .filter(|s| !s.is_empty())
        };
        let num = |name: &str| -> Result<f64, IngestError> {
            let raw = field(name).ok_or_else(|| IngestError::Row {
                row: row_no,
                message: format!("empty `{name}`"),
            })?;
            raw.parse::<f64>().map_err(|_| IngestError::Row {
                row: row_no,
                message: format!("`{name}` = {raw:?} is not a number"),
            })
        };
        let flag = |name: &str| -> Result<bool, IngestError> {
            let raw = field(name).unwrap_or("");
            parse_flag(raw).ok_or_else(|| IngestError::Row {
                row: row_no,
                message: format!("`{name}` = {raw:?} is not a boolean"),
            })
        };
        let lottery = |shape: &str, num_col: &str| -> Result<LotShape, IngestError> {
            let Some(raw) = field(shape) else {
                return Ok(LotShape::None);
            };
            let count = match field(num_col) {
                Some(n) => n.parse::<f64>().map_err(|_| IngestError::Row {
                    row: row_no,
                    message: format!("`{num_col}` = {n:?} is not a number"),
                })? as usize,
                None => 1,
            };
            LotShape::parse(raw, count).ok_or_else(|| IngestError::Row {
                row: row_no,
                message: format!("unknown lottery shape {raw:?}"),
            })
        };

        let mut gamble_a = build_gamble(
            num("Ha")?,
            num("pHa")?,
            num("La")?,
            lottery("LotShapeA", "LotNumA")?,
        );
        let mut gamble_b = build_gamble(
            num("Hb")?,
            num("pHb")?,
            num("Lb")?,
            lottery("LotShapeB", "LotNumB")?,
        );
        for g in [&mut gamble_a, &mut gamble_b] {
            if g.normalize_rounding()
                .map_err(|source| IngestError::Invalid { row: row_no, source })?
            {
                renormalized += 1;
            }
        }

        let b_rate = num("bRate")?;
        if !(0.0..=1.0).contains(&b_rate) {
            return Err(IngestError::Row {
                row: row_no,
                message: format!("bRate {b_rate} outside [0, 1]"),
            });
        }
        let n = num("n")?;
        if n < 0.0 || n.fract() != 0.0 {
            return Err(IngestError::Row {
                row: row_no,
                message: format!("participant count {n} is not a whole number"),
            });
        }
        let n = n as u32;
        if n < MIN_PARTICIPANTS {
            warn!("row {row_no}: only {n} participants");
        }

        let base = field("Problem")
            .map(str::to_string)
            .unwrap_or_else(|| row_no.to_string());
        let id = unique_id(&mut seen, base);
        let problem = ChoiceProblem {
            id: id.clone(),
            gamble_a,
            gamble_b,
            ambiguous: flag("Amb")?,
            feedback: flag("Feedback")?,
        };
        records.push(ChoiceRecord {
            problem,
            observation: ChoiceObservation {
                problem_id: id,
                prop_a: 1.0 - b_rate,
                n_participants: n,
            },
        });
    }
    if renormalized > 0 {
        warn!("renormalized {renormalized} gambles whose probabilities were off by rounding");
    }
    if records.is_empty() {
        warn!("choices13k input has a header but no rows");
    }
    Ok(Dataset::new(records))
}

fn unique_id(seen: &mut HashMap<String, usize>, base: String) -> String {
    let count = seen.entry(base.clone()).or_insert(0);
    *count += 1;
    if *count == 1 {
        base
    } else {
        format!("{base}#{count}")
    }
}

fn parse_flag(raw: &str) -> Option<bool> {
    match raw.to_ascii_lowercase().as_str() {
        "true" | "1" | "1.0" | "yes" => Some(true),
        "false" | "0" | "0.0" | "no" => Some(false),
        _ => None,
    }
}

/// Lottery that replaces the high payoff of a gamble. Each shape has mean
/// zero around the high payoff, so the expected value is unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LotShape {
    None,
    Symmetric(usize),
    LeftSkew(usize),
    RightSkew(usize),
}

impl LotShape {
    /// Accepts the textual (`-`, `Symm`, `L-skew`, `R-skew`) and numeric
    /// (0..=3, same order) encodings.
    pub fn parse(raw: &str, count: usize) -> Option<Self> {
        let code = match raw.trim() {
            "-" | "none" | "None" => 0,
            "Symm" | "symm" => 1,
            "L-skew" | "l-skew" => 2,
            "R-skew" | "r-skew" => 3,
            other => other.parse::<f64>().ok().filter(|v| v.fract() == 0.0)? as i64,
        };
        let count = count.max(1);
        match code {
            0 => Some(Self::None),
            _ if count <= 1 => Some(Self::None),
            1 => Some(Self::Symmetric(count)),
            2 => Some(Self::LeftSkew(count)),
            3 => Some(Self::RightSkew(count)),
            _ => None,
        }
    }

    /// `(offset, prob)` pairs added to the high payoff.
    pub fn offsets(self) -> Vec<(f64, f64)> {
        match self {
            Self::None => vec![(0.0, 1.0)],
            Self::Symmetric(n) => {
                let k = (n - 1) as u32;
                (0..=k)
                    .map(|j| {
                        (
                            j as f64 - k as f64 / 2.0,
                            binomial(k, j) as f64 / 2f64.powi(k as i32),
                        )
                    })
                    .collect()
            }
            Self::RightSkew(n) | Self::LeftSkew(n) => {
                let sign = if matches!(self, Self::RightSkew(_)) {
                    1.0
                } else {
                    -1.0
                };
                let c = -(n as f64) - 1.0;
                let mut out: Vec<(f64, f64)> = (1..=n as i32)
                    .map(|i| (sign * (c + 2f64.powi(i)), 0.5f64.powi(i)))
                    .collect();
                // last outcome absorbs the remaining tail mass
                if let Some(last) = out.last_mut() {
                    last.1 *= 2.0;
                }
                out
            }
        }
    }
}

fn binomial(n: u32, k: u32) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * u64::from(n - i) / u64::from(i + 1))
}

/// High payoff (possibly expanded into a lottery) with probability `p_high`,
/// low payoff otherwise. Zero-probability outcomes are dropped.
pub fn build_gamble(high: f64, p_high: f64, low: f64, shape: LotShape) -> Gamble {
    let mut payoffs = Vec::new();
    let mut probs = Vec::new();
    for (offset, q) in shape.offsets() {
        let p = p_high * q;
        if p != 0.0 {
            payoffs.push(high + offset);
            probs.push(p);
        }
    }
    if p_high != 1.0 {
        payoffs.push(low);
        probs.push(1.0 - p_high);
    }
    if payoffs.is_empty() {
        payoffs.push(low);
        probs.push(1.0);
    }
    Gamble { payoffs, probs }
}

/// One line of the canonical line-delimited dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalRecord {
    pub id: String,
    pub payoffs_a: Vec<f64>,
    pub probs_a: Vec<f64>,
    pub payoffs_b: Vec<f64>,
    pub probs_b: Vec<f64>,
    pub prop_a: f64,
    pub n: u32,
}

impl From<&ChoiceRecord> for CanonicalRecord {
    fn from(r: &ChoiceRecord) -> Self {
        Self {
            id: r.problem.id.clone(),
            payoffs_a: r.problem.gamble_a.payoffs.clone(),
            probs_a: r.problem.gamble_a.probs.clone(),
            payoffs_b: r.problem.gamble_b.payoffs.clone(),
            probs_b: r.problem.gamble_b.probs.clone(),
            prop_a: r.observation.prop_a,
            n: r.observation.n_participants,
        }
    }
}

/// Writes one JSON object per record. The canonical form carries
/// experiment-ready problems, so the ambiguity/feedback flags are not stored.
pub fn write_canonical<W: Write>(dataset: &Dataset, mut out: W) -> std::io::Result<()> {
    for r in &dataset.records {
        serde_json::to_writer(&mut out, &CanonicalRecord::from(r))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_canonical(path: &Path) -> Result<Dataset, IngestError> {
    let file = fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_canonical(BufReader::new(file))
}

pub fn parse_canonical<R: BufRead>(reader: R) -> Result<Dataset, IngestError> {
    let mut records = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let row = i + 1;
        let line = line.map_err(|e| IngestError::Row {
            row,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CanonicalRecord = serde_json::from_str(&line).map_err(|e| IngestError::Row {
            row,
            message: e.to_string(),
        })?;
        let mut gamble_a = Gamble {
            payoffs: rec.payoffs_a,
            probs: rec.probs_a,
        };
        let mut gamble_b = Gamble {
            payoffs: rec.payoffs_b,
            probs: rec.probs_b,
        };
        for g in [&mut gamble_a, &mut gamble_b] {
            g.normalize_rounding()
                .map_err(|source| IngestError::Invalid { row, source })?;
        }
        if !(0.0..=1.0).contains(&rec.prop_a) {
            return Err(IngestError::Row {
                row,
                message: format!("prop_a {} outside [0, 1]", rec.prop_a),
            });
        }
        if !seen.insert(rec.id.clone()) {
            return Err(IngestError::DuplicateId(rec.id));
        }
        records.push(ChoiceRecord {
            problem: ChoiceProblem::new(rec.id.clone(), gamble_a, gamble_b),
            observation: ChoiceObservation {
                problem_id: rec.id,
                prop_a: rec.prop_a,
                n_participants: rec.n,
            },
        });
    }
    if records.is_empty() {
        warn!("canonical dataset is empty");
    }
    Ok(Dataset::new(records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g(payoffs: &[f64], probs: &[f64]) -> Gamble {
        Gamble::new(payoffs.to_vec(), probs.to_vec()).unwrap()
    }

    #[test]
    fn expected_value_examples() {
        assert_eq!(expected_value(&g(&[5.0], &[1.0])).unwrap(), 5.0);
        assert_eq!(expected_value(&g(&[10.0, 0.0], &[0.5, 0.5])).unwrap(), 5.0);
        assert_eq!(expected_value(&g(&[-3.0], &[1.0])).unwrap(), -3.0);
    }

    #[test]
    fn expected_value_rejects_bad_gambles() {
        let mismatch = Gamble {
            payoffs: vec![1.0, 2.0],
            probs: vec![1.0],
        };
        assert!(matches!(
            expected_value(&mismatch),
            Err(ValidationError::LengthMismatch { .. })
        ));
        let short = Gamble {
            payoffs: vec![1.0, 2.0],
            probs: vec![0.5, 0.4],
        };
        assert!(matches!(
            expected_value(&short),
            Err(ValidationError::Unnormalized { .. })
        ));
        let negative = Gamble {
            payoffs: vec![1.0, 2.0],
            probs: vec![1.5, -0.5],
        };
        assert!(matches!(
            expected_value(&negative),
            Err(ValidationError::ProbOutOfRange { .. })
        ));
        assert_eq!(Gamble::new(vec![], vec![]), Err(ValidationError::Empty));
    }

    #[test]
    fn max_ev_examples() {
        let b = g(&[10.0, 0.0], &[0.5, 0.5]);
        let cases = [(5.0, 0.5), (6.0, 1.0), (4.0, 0.0)];
        for (a, expected) in cases {
            let p = ChoiceProblem::new("p", Gamble::certain(a), b.clone());
            assert_eq!(max_ev_prediction(&p).unwrap(), expected);
        }
    }

    #[test]
    fn lottery_offsets_have_zero_mean_and_unit_mass() {
        for shape in [
            LotShape::Symmetric(3),
            LotShape::Symmetric(7),
            LotShape::LeftSkew(2),
            LotShape::LeftSkew(6),
            LotShape::RightSkew(4),
            LotShape::RightSkew(8),
        ] {
            let offsets = shape.offsets();
            let mass: f64 = offsets.iter().map(|o| o.1).sum();
            let mean: f64 = offsets.iter().map(|o| o.0 * o.1).sum();
            assert!((mass - 1.0).abs() < 1e-12, "{shape:?}");
            assert!(mean.abs() < 1e-12, "{shape:?}");
        }
        // R-skew with 3 outcomes: -2, 0, 4 at 1/2, 1/4, 1/4
        assert_eq!(
            LotShape::RightSkew(3).offsets(),
            vec![(-2.0, 0.5), (0.0, 0.25), (4.0, 0.25)]
        );
    }

    #[test]
    fn build_gamble_drops_empty_branches() {
        let sure = build_gamble(7.0, 1.0, 3.0, LotShape::None);
        assert_eq!(sure, Gamble::certain(7.0));
        let two = build_gamble(10.0, 0.25, -2.0, LotShape::None);
        assert_eq!(two.payoffs, vec![10.0, -2.0]);
        assert_eq!(two.probs, vec![0.25, 0.75]);
    }

    const HEADER: &str =
        "Problem,Feedback,n,Block,Ha,pHa,La,LotShapeA,LotNumA,Hb,pHb,Lb,LotShapeB,LotNumB,Amb,Corr,bRate,bRate_std";

    #[test]
    fn parses_selections_rows() {
        let text = format!(
            "{HEADER}\n\
             1,True,15,1,5,1,5,0,1,10,0.5,0,0,1,False,0,0.4,0.1\n\
             2,False,20,2,8,0.5,2,0,1,9,0.4,1,3,3,True,0,0.75,0.1\n"
        );
        let ds = parse_choices13k(&text).unwrap();
        assert_eq!(ds.len(), 2);
        let r = &ds.records[0];
        assert_eq!(r.problem.gamble_a, Gamble::certain(5.0));
        assert!((r.observation.prop_a - 0.6).abs() < 1e-12);
        assert!(r.problem.feedback && !r.problem.ambiguous);
        let r = &ds.records[1];
        assert_eq!(r.problem.gamble_b.len(), 4);
        let ev_b = expected_value(&r.problem.gamble_b).unwrap();
        assert!((ev_b - (0.4 * 9.0 + 0.6)).abs() < 1e-12);
        assert!(r.problem.ambiguous && !r.problem.feedback);
    }

    #[test]
    fn empty_file_gives_empty_dataset() {
        assert!(parse_choices13k("").unwrap().is_empty());
        assert!(parse_choices13k(&format!("{HEADER}\n")).unwrap().is_empty());
    }

    #[test]
    fn missing_column_is_reported() {
        let err = parse_choices13k("Ha,pHa,La\n1,1,1\n").unwrap_err();
        assert!(matches!(err, IngestError::MissingColumn(c) if c == "Hb"));
    }

    #[test]
    fn bad_probability_names_the_row() {
        let text = format!(
            "{HEADER}\n\
             1,True,15,1,5,1,5,0,1,10,0.5,0,0,1,False,0,0.4,0.1\n\
             2,True,15,1,5,1.1,5,0,1,10,0.5,0,0,1,False,0,0.4,0.1\n"
        );
        match parse_choices13k(&text).unwrap_err() {
            IngestError::Invalid { row, .. } => assert_eq!(row, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn canonical_row_with_short_probabilities_is_rejected() {
        let text = r#"{"id":"a","payoffs_a":[1],"probs_a":[1],"payoffs_b":[2,0],"probs_b":[0.5,0.5],"prop_a":0.5,"n":20}
{"id":"b","payoffs_a":[1,2],"probs_a":[0.4,0.5],"payoffs_b":[2],"probs_b":[1],"prop_a":0.5,"n":20}
"#;
        match parse_canonical(text.as_bytes()).unwrap_err() {
            IngestError::Invalid { row, source } => {
                assert_eq!(row, 2);
                assert!(matches!(source, ValidationError::Unnormalized { .. }));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rounding_error_is_renormalized() {
        let text = r#"{"id":"a","payoffs_a":[1,2],"probs_a":[0.3333333,0.6666666],"payoffs_b":[2],"probs_b":[1],"prop_a":0.5,"n":20}"#;
        let ds = parse_canonical(text.as_bytes()).unwrap();
        let sum: f64 = ds.records[0].problem.gamble_a.probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn canonical_round_trip() {
        let text = format!(
            "{HEADER}\n\
             1,True,15,1,5,1,5,0,1,10,0.5,0,0,1,False,0,0.4,0.1\n\
             7,True,31,1,-3,0.2,4,0,1,9,0.4,1,Symm,3,False,0,0.25,0.1\n"
        );
        let ds = parse_choices13k(&text).unwrap();
        let mut buf = Vec::new();
        write_canonical(&ds, &mut buf).unwrap();
        let back = parse_canonical(buf.as_slice()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn duplicate_problem_numbers_get_distinct_ids() {
        let text = format!(
            "{HEADER}\n\
             4,True,15,1,5,1,5,0,1,10,0.5,0,0,1,False,0,0.4,0.1\n\
             4,False,15,1,5,1,5,0,1,10,0.5,0,0,1,False,0,0.4,0.1\n"
        );
        let ds = parse_choices13k(&text).unwrap();
        assert_eq!(ds.records[0].problem.id, "4");
        assert_eq!(ds.records[1].problem.id, "4#2");
    }

    fn problem(amb: bool, fb: bool) -> ChoiceRecord {
        let mut p = ChoiceProblem::new("x", Gamble::certain(1.0), Gamble::certain(2.0));
        p.ambiguous = amb;
        p.feedback = fb;
        ChoiceRecord {
            observation: ChoiceObservation {
                problem_id: "x".into(),
                prop_a: 0.5,
                n_participants: 20,
            },
            problem: p,
        }
    }

    #[test]
    fn filter_examples() {
        let clean = Dataset::new(vec![problem(false, true), problem(false, true)]);
        assert_eq!(filter_experiment_subset(&clean), clean);
        let ambiguous = Dataset::new(vec![problem(true, true), problem(true, false)]);
        assert!(filter_experiment_subset(&ambiguous).is_empty());
        let mixed = Dataset::new(vec![
            problem(false, true),
            problem(false, false),
            problem(true, true),
        ]);
        assert_eq!(filter_experiment_subset(&mixed).len(), 1);
    }

    fn arb_gamble() -> impl Strategy<Value = Gamble> {
        prop::collection::vec((-100.0f64..100.0, 0.01f64..1.0), 1..5).prop_map(|outs| {
            let total: f64 = outs.iter().map(|o| o.1).sum();
            Gamble {
                payoffs: outs.iter().map(|o| o.0).collect(),
                probs: outs.iter().map(|o| o.1 / total).collect(),
            }
        })
    }

    proptest! {
        #[test]
        fn ev_is_linear_in_payoff_scale(g in arb_gamble(), k in -10.0f64..10.0) {
            let lhs = expected_value(&g.scaled(k)).unwrap();
            let rhs = k * expected_value(&g).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        }

        #[test]
        fn ev_of_sure_thing_is_its_payoff(x in -1e6f64..1e6) {
            prop_assert_eq!(expected_value(&Gamble::certain(x)).unwrap(), x);
        }

        #[test]
        fn max_ev_ignores_positive_rescaling(a in arb_gamble(), b in arb_gamble(), k in 0.01f64..100.0) {
            let p = ChoiceProblem::new("p", a, b);
            let scaled = ChoiceProblem::new("p", p.gamble_a.scaled(k), p.gamble_b.scaled(k));
            let (ea, eb) = (ev_unchecked(&p.gamble_a), ev_unchecked(&p.gamble_b));
            // skip near-ties where rescaling can flip the last bit
            prop_assume!((ea - eb).abs() > 1e-9 * (1.0 + ea.abs()));
            prop_assert_eq!(max_ev_prediction(&p).unwrap(), max_ev_prediction(&scaled).unwrap());
        }

        #[test]
        fn filter_is_idempotent(flags in prop::collection::vec((any::<bool>(), any::<bool>()), 0..40)) {
            let ds = Dataset::new(flags.iter().map(|&(a, f)| problem(a, f)).collect());
            let once = filter_experiment_subset(&ds);
            prop_assert_eq!(filter_experiment_subset(&once), once);
        }
    }
}
