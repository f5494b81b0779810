//! Rank statistics: win-count aggregation of pairwise judgments, midrank
//! Spearman, Pearson, MSE, and cross-agent correlation matrices.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} values, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("correlation undefined for a constant vector")]
    ConstantInput,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("pair ({0}, {1}) judged more than once")]
    DuplicatePair(usize, usize),
    #[error("item {0} out of range for {1} items")]
    UnknownItem(usize, usize),
    #[error("item {0} compared with itself")]
    SelfPair(usize),
    #[error("need at least two items")]
    TooFewItems,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    FirstStronger,
    SecondStronger,
    Tie,
}

/// One pairwise judgment between items `first` and `second`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseOutcome {
    pub first: usize,
    pub second: usize,
    pub verdict: Verdict,
}

/// Per-item scores with descending midranks (rank 1 = highest score).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub scores: Vec<f64>,
    pub ranks: Vec<f64>,
}

impl Ranking {
    pub fn from_scores(scores: Vec<f64>) -> Self {
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let ranks = midranks(&neg);
        Self { scores, ranks }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Item indices from strongest to weakest; ties keep index order.
    pub fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]).then(a.cmp(&b)));
        idx
    }

    /// Element-wise mean of several rankings' scores, re-ranked.
    pub fn mean_of(rankings: &[Ranking]) -> Option<Ranking> {
        let first = rankings.first()?;
        let n = first.len();
        if rankings.iter().any(|r| r.len() != n) {
            return None;
        }
        let k = rankings.len() as f64;
        let scores = (0..n)
            .map(|i| rankings.iter().map(|r| r.scores[i]).sum::<f64>() / k)
            .collect();
        Some(Self::from_scores(scores))
    }
}

/// Win score = wins + 0.5·ties per item.
pub fn aggregate_pairwise(outcomes: &[PairwiseOutcome], n_items: usize) -> Result<Ranking, MetricsError> {
    if n_items < 2 {
        return Err(MetricsError::TooFewItems);
    }
    let mut seen = HashSet::new();
    let mut scores = vec![0.0; n_items];
    for o in outcomes {
        for id in [o.first, o.second] {
            if id >= n_items {
                return Err(MetricsError::UnknownItem(id, n_items));
            }
        }
        if o.first == o.second {
            return Err(MetricsError::SelfPair(o.first));
        }
        let key = (o.first.min(o.second), o.first.max(o.second));
        if !seen.insert(key) {
            return Err(MetricsError::DuplicatePair(key.0, key.1));
        }
        match o.verdict {
            Verdict::FirstStronger => scores[o.first] += 1.0,
            Verdict::SecondStronger => scores[o.second] += 1.0,
            Verdict::Tie => {
                scores[o.first] += 0.5;
                scores[o.second] += 0.5;
            }
        }
    }
    Ok(Ranking::from_scores(scores))
}

/// Ascending ranks starting at 1, ties sharing the mean of their positions.
pub fn midranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn check_pair(x: &[f64], y: &[f64], min_len: usize) -> Result<(), MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < min_len {
        return Err(MetricsError::TooShort {
            need: min_len,
            got: x.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite);
    }
    Ok(())
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    check_pair(x, y, 2)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricsError::ConstantInput);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation of midranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    check_pair(x, y, 3)?;
    pearson(&midranks(x), &midranks(y))
}

pub fn mse(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    check_pair(x, y, 1)?;
    Ok(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub spearman: f64,
    pub pearson: f64,
    pub mse: f64,
    pub n: usize,
}

impl CorrelationReport {
    pub fn compute(x: &[f64], y: &[f64]) -> Result<Self, MetricsError> {
        Ok(Self {
            spearman: spearman(x, y)?,
            pearson: pearson(x, y)?,
            mse: mse(x, y)?,
            n: x.len(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationKind {
    Spearman,
    Pearson,
}

/// Symmetric pairwise correlation matrix with a unit diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

pub fn correlation_matrix(
    vectors: &[(String, Vec<f64>)],
    kind: CorrelationKind,
) -> Result<CorrelationMatrix, MetricsError> {
    let n = vectors.len();
    if let Some((_, first)) = vectors.first() {
        if let Some((_, bad)) = vectors.iter().find(|(_, v)| v.len() != first.len()) {
            return Err(MetricsError::LengthMismatch(first.len(), bad.len()));
        }
    }
    let mut values = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let (x, y) = (&vectors[i].1, &vectors[j].1);
            let r = match kind {
                CorrelationKind::Spearman => spearman(x, y)?,
                CorrelationKind::Pearson => pearson(x, y)?,
            };
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        names: vectors.iter().map(|(name, _)| name.clone()).collect(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn o(first: usize, second: usize, verdict: Verdict) -> PairwiseOutcome {
        PairwiseOutcome { first, second, verdict }
    }

    #[test]
    fn total_order() {
        use Verdict::*;
        let r = aggregate_pairwise(&[o(0, 1, FirstStronger), o(0, 2, FirstStronger), o(1, 2, FirstStronger)], 3)
            .unwrap();
        assert_eq!(r.scores, vec![2.0, 1.0, 0.0]);
        assert_eq!(r.ranks, vec![1.0, 2.0, 3.0]);
        assert_eq!(r.order(), vec![0, 1, 2]);
    }

    #[test]
    fn ties_and_cycles_collapse() {
        use Verdict::*;
        let ties = aggregate_pairwise(&[o(0, 1, Tie), o(0, 2, Tie), o(1, 2, Tie)], 3).unwrap();
        assert_eq!(ties.scores, vec![1.0; 3]);
        assert_eq!(ties.ranks, vec![2.0; 3]);
        let cycle = aggregate_pairwise(
            &[o(0, 1, FirstStronger), o(1, 2, FirstStronger), o(2, 0, FirstStronger)],
            3,
        )
        .unwrap();
        assert_eq!(cycle, ties);
    }

    #[test]
    fn aggregation_errors() {
        use Verdict::*;
        assert_eq!(
            aggregate_pairwise(&[o(0, 1, Tie), o(1, 0, Tie)], 2),
            Err(MetricsError::DuplicatePair(0, 1))
        );
        assert_eq!(aggregate_pairwise(&[o(0, 5, Tie)], 3), Err(MetricsError::UnknownItem(5, 3)));
        assert_eq!(aggregate_pairwise(&[o(1, 1, Tie)], 3), Err(MetricsError::SelfPair(1)));
        assert_eq!(aggregate_pairwise(&[], 1), Err(MetricsError::TooFewItems));
    }

    #[test]
    fn spearman_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman(&x, &x).unwrap(), 1.0);
        assert!((spearman(&x, &[4.0, 3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        // 1 - 6·Σd²/(n(n²-1)) = 1 - 6·2/60
        assert!((spearman(&x, &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(spearman(&x, &[1.0; 4]), Err(MetricsError::ConstantInput));
        assert!(matches!(spearman(&x[..2], &x[..2]), Err(MetricsError::TooShort { .. })));
    }

    #[test]
    fn midrank_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn pearson_and_mse_examples() {
        assert_eq!(pearson(&[0.0, 1.0], &[1.0, 0.0]).unwrap(), -1.0);
        assert_eq!(mse(&[0.0, 1.0], &[1.0, 0.0]).unwrap(), 1.0);
        let x = [0.2, 0.9, 0.4];
        let rep = CorrelationReport::compute(&x, &x).unwrap();
        assert_eq!((rep.spearman, rep.pearson, rep.mse), (1.0, 1.0, 0.0));
        assert_eq!(mse(&x, &x[..2]), Err(MetricsError::LengthMismatch(3, 2)));
    }

    #[test]
    fn matrix_shapes() {
        let v: Vec<f64> = (0..10).map(f64::from).collect();
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        let m = correlation_matrix(
            &[("a".into(), v.clone()), ("b".into(), v.clone()), ("c".into(), neg)],
            CorrelationKind::Spearman,
        )
        .unwrap();
        assert_eq!(m.values[0][1], 1.0);
        assert!((m.values[0][2] + 1.0).abs() < 1e-12);
        assert_eq!(m.values[2][0], m.values[0][2]);
        assert!(correlation_matrix(&[("a".into(), v), ("b".into(), vec![1.0])], CorrelationKind::Pearson).is_err());
    }

    #[test]
    fn independent_vectors_are_uncorrelated() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let vecs: Vec<(String, Vec<f64>)> = (0..3)
            .map(|i| (format!("v{i}"), (0..1000).map(|_| rng.random::<f64>()).collect()))
            .collect();
        let m = correlation_matrix(&vecs, CorrelationKind::Spearman).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(m.values[i][j].abs() < 0.1);
                }
            }
        }
    }

    fn non_constant(v: &[f64]) -> bool {
        v.iter().any(|x| *x != v[0])
    }

    proptest! {
        #[test]
        fn binary_spearman_equals_pearson(
            x in prop::collection::vec(prop::bool::ANY, 3..60),
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> = x.iter().map(|_| f64::from(rng.random::<bool>() as u8)).collect();
            let x: Vec<f64> = x.iter().map(|&b| f64::from(b as u8)).collect();
            prop_assume!(non_constant(&x) && non_constant(&y));
            let s = spearman(&x, &y).unwrap();
            let p = pearson(&x, &y).unwrap();
            prop_assert!((s - p).abs() < 1e-12);
        }

        #[test]
        fn spearman_monotone_invariant(x in prop::collection::vec(-5.0f64..5.0, 3..40), y in prop::collection::vec(-5.0f64..5.0, 3..40)) {
            let n = x.len().min(y.len());
            let (x, y) = (&x[..n], &y[..n]);
            prop_assume!(non_constant(x) && non_constant(y));
            let tx: Vec<f64> = x.iter().map(|v| v.exp()).collect();
            let ty: Vec<f64> = y.iter().map(|v| v * v * v + 2.0 * v).collect();
            prop_assert!((spearman(x, y).unwrap() - spearman(&tx, &ty).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn pearson_affine_invariant(x in prop::collection::vec(-5.0f64..5.0, 3..40), a in 0.1f64..10.0, b in -5.0f64..5.0) {
            prop_assume!(non_constant(&x));
            let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| v + (i as f64).sin()).collect();
            prop_assume!(non_constant(&y));
            let ay: Vec<f64> = y.iter().map(|v| a * v + b).collect();
            prop_assert!((pearson(&x, &y).unwrap() - pearson(&x, &ay).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn mse_zero_iff_equal(x in prop::collection::vec(-5.0f64..5.0, 1..20), i in any::<prop::sample::Index>(), bump in 0.001f64..1.0) {
            prop_assert_eq!(mse(&x, &x).unwrap(), 0.0);
            let mut y = x.clone();
            let k = i.index(y.len());
            y[k] += bump;
            prop_assert!(mse(&x, &y).unwrap() > 0.0);
        }

        #[test]
        fn win_scores_conserved(verdicts in prop::collection::vec(0u8..3, 10)) {
            // all pairs of 5 items
            let pairs: Vec<(usize, usize)> = (0..5).flat_map(|i| ((i + 1)..5).map(move |j| (i, j))).collect();
            let outcomes: Vec<_> = pairs.iter().zip(&verdicts).map(|(&(i, j), v)| PairwiseOutcome {
                first: i,
                second: j,
                verdict: [Verdict::FirstStronger, Verdict::SecondStronger, Verdict::Tie][*v as usize],
            }).collect();
            let r = aggregate_pairwise(&outcomes, 5).unwrap();
            prop_assert_eq!(r.scores.iter().sum::<f64>(), 10.0);
        }
    }
}
