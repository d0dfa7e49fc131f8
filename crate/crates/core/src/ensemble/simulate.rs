//! Monte-Carlo estimate of majority-vote accuracy for correlated voters.
//!
//! Each trial, with probability `correlation` every voter shares one
//! Bernoulli(p) outcome; otherwise each voter is right independently with
//! probability `p`. The vote is right when more than half the voters are.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SimulationError {
    #[error("ensemble size must be odd, got {0}")]
    EvenK(usize),
    #[error("{name} = {value} outside [0, 1]")]
    Probability { name: &'static str, value: f64 },
    #[error("at least one trial is required")]
    NoTrials,
}

fn unit(name: &'static str, value: f64) -> Result<(), SimulationError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(SimulationError::Probability { name, value })
    }
}

pub fn simulate_vote_accuracy(
    k: usize,
    p: f64,
    correlation: f64,
    trials: usize,
    seed: u64,
) -> Result<f64, SimulationError> {
    if k.is_multiple_of(2) {
        return Err(SimulationError::EvenK(k));
    }
    unit("p", p)?;
    unit("correlation", correlation)?;
    if trials == 0 {
        return Err(SimulationError::NoTrials);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut right_votes = 0usize;
    for _ in 0..trials {
        let correct = if rng.random_bool(correlation) {
            rng.random_bool(p)
        } else {
            (0..k).filter(|_| rng.random_bool(p)).count() > k / 2
        };
        right_votes += correct as usize;
    }
    Ok(right_votes as f64 / trials as f64)
}

/// Exact majority accuracy of `k` independent voters (odd `k`).
pub fn majority_accuracy(k: usize, p: f64) -> f64 {
    let mut total = 0.0;
    let mut binom = 1.0f64; // C(k, j)
    for j in 0..=k {
        if j > k / 2 {
            total += binom * p.powi(j as i32) * (1.0 - p).powi((k - j) as i32);
        }
        binom = binom * (k - j) as f64 / (j + 1) as f64;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        // 3p^2(1-p) + p^3 at p = 0.76
        assert!((majority_accuracy(3, 0.76) - 0.854848).abs() < 1e-12);
        assert!((majority_accuracy(1, 0.72) - 0.72).abs() < 1e-15);
        assert!((majority_accuracy(5, 0.5) - 0.5).abs() < 1e-12);
        assert_eq!(majority_accuracy(7, 1.0), 1.0);
    }

    #[test]
    fn argument_errors() {
        assert_eq!(
            simulate_vote_accuracy(4, 0.7, 0.0, 10, 0),
            Err(SimulationError::EvenK(4))
        );
        assert_eq!(
            simulate_vote_accuracy(0, 0.7, 0.0, 10, 0),
            Err(SimulationError::EvenK(0))
        );
        assert!(matches!(
            simulate_vote_accuracy(3, 1.2, 0.0, 10, 0),
            Err(SimulationError::Probability { name: "p", .. })
        ));
        assert!(matches!(
            simulate_vote_accuracy(3, 0.7, -0.1, 10, 0),
            Err(SimulationError::Probability {
                name: "correlation",
                ..
            })
        ));
        assert_eq!(
            simulate_vote_accuracy(3, 0.7, 0.0, 0, 0),
            Err(SimulationError::NoTrials)
        );
    }

    #[test]
    fn deterministic_per_seed() {
        let a = simulate_vote_accuracy(5, 0.6, 0.3, 5000, 9).unwrap();
        assert_eq!(a, simulate_vote_accuracy(5, 0.6, 0.3, 5000, 9).unwrap());
    }

    #[test]
    fn degenerate_probabilities() {
        assert_eq!(simulate_vote_accuracy(3, 1.0, 0.5, 1000, 1).unwrap(), 1.0);
        assert_eq!(simulate_vote_accuracy(3, 0.0, 0.5, 1000, 1).unwrap(), 0.0);
    }
}
