//! Fixtures for the kernel benchmarks.

use stmp_core::harness::{generate, OperatorKind, ProblemSpec, SyntheticProblem};
use stmp_core::{GaussianMessage, GmmPrior};

pub const SEED: u64 = 7;

/// Sparse prior used throughout the benches.
pub fn sparse_prior() -> GmmPrior {
    GmmPrior::bernoulli_gaussian(0.1, 1.0).expect("valid prior")
}

pub fn problem(kind: OperatorKind, n: usize, m: usize) -> SyntheticProblem {
    let prior = sparse_prior();
    let noise_std = 0.05 * prior.second_moment().sqrt();
    let spec = ProblemSpec { n, m, operator_kind: kind, prior, noise_std };
    generate(&spec, SEED, None).expect("problem generation")
}

/// A pseudo-observation of the truth at variance `v`.
pub fn noisy_message(truth: &[f64], v: f64) -> GaussianMessage {
    let noise = GmmPrior::gaussian(0.0, v).expect("valid").sample(truth.len(), SEED + 1);
    let mean = truth.iter().zip(&noise).map(|(x, e)| x + e).collect();
    GaussianMessage::new(mean, v).expect("valid message")
}

pub fn signal(n: usize) -> Vec<f64> {
    sparse_prior().sample(n, SEED)
}
