//! Seeded synthetic choice problems for tests and offline runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::choice::{expected_value, ChoiceObservation, ChoiceProblem, ChoiceRecord, Dataset, Gamble};

/// Payoffs are whole dollars in [-10, 10].
pub const PAYOFF_RANGE: i32 = 10;

fn random_gamble(rng: &mut impl Rng) -> Gamble {
    let n = rng.random_range(1..=3usize);
    if n == 1 {
        return Gamble::certain(rng.random_range(-PAYOFF_RANGE..=PAYOFF_RANGE) as f64);
    }
    // probabilities on a 0.05 lattice, none zero
    let mut cuts: Vec<u32> = Vec::with_capacity(n - 1);
    while cuts.len() < n - 1 {
        let c = rng.random_range(1..20u32);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.sort_unstable();
    let mut probs = Vec::with_capacity(n);
    let mut prev = 0;
    for c in cuts.into_iter().chain([20]) {
        probs.push(f64::from(c - prev) / 20.0);
        prev = c;
    }
    let payoffs = (0..n)
        .map(|_| rng.random_range(-PAYOFF_RANGE..=PAYOFF_RANGE) as f64)
        .collect();
    Gamble::new(payoffs, probs).expect("lattice probabilities sum to one")
}

/// `n` problems with ids `syn-0000`, `syn-0001`, ...
pub fn synthetic_problems(n: usize, seed: u64) -> Vec<ChoiceProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let a = random_gamble(&mut rng);
            let b = random_gamble(&mut rng);
            ChoiceProblem::new(format!("syn-{i:04}"), a, b)
        })
        .collect()
}

/// Synthetic problems with simulated proportions: each of `participants`
/// picks A with probability σ(0.5·(EV_A − EV_B)).
pub fn synthetic_dataset(n: usize, participants: u32, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let records = synthetic_problems(n, seed)
        .into_iter()
        .map(|problem| {
            let diff = expected_value(&problem.gamble_a).expect("valid")
                - expected_value(&problem.gamble_b).expect("valid");
            let p = 1.0 / (1.0 + (-0.5 * diff).exp());
            let k = (0..participants).filter(|_| rng.random::<f64>() < p).count();
            ChoiceRecord {
                observation: ChoiceObservation {
                    problem_id: problem.id.clone(),
                    prop_a: k as f64 / f64::from(participants.max(1)),
                    n_participants: participants,
                },
                problem,
            }
        })
        .collect();
    Dataset::new(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_valid() {
        let a = synthetic_problems(200, 4);
        assert_eq!(a, synthetic_problems(200, 4));
        assert_ne!(a, synthetic_problems(200, 5));
        for p in &a {
            p.gamble_a.validate().unwrap();
            p.gamble_b.validate().unwrap();
        }
        assert!(a.iter().any(|p| p.gamble_a.min_payoff() < 0.0));
        assert!(a.iter().any(|p| p.gamble_b.len() == 3));
    }

    #[test]
    fn dataset_is_consistent() {
        let d = synthetic_dataset(50, 20, 1);
        assert_eq!(d.len(), 50);
        for r in &d.records {
            assert_eq!(r.problem.id, r.observation.problem_id);
            assert!((0.0..=1.0).contains(&r.observation.prop_a));
        }
        assert_eq!(d, synthetic_dataset(50, 20, 1));
    }
}
