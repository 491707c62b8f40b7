//! Seeded synthetic instances of `y = Ax + n`.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, Result};
use crate::linops::{LinearOperator, Operator};
use crate::lmmse::LmmseProblem;
use crate::priors::GmmPrior;
use crate::rng;

use super::config::OperatorKind;

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub n: usize,
    pub m: usize,
    pub operator_kind: OperatorKind,
    pub prior: GmmPrior,
    /// Noise standard deviation.
    pub noise_std: f64,
}

#[derive(Debug)]
pub struct SyntheticProblem {
    pub truth: Vec<f64>,
    pub problem: LmmseProblem,
}

pub fn build_operator(kind: OperatorKind, n: usize, m: usize, seed: u64) -> Result<Operator> {
    match kind {
        OperatorKind::DenseGaussian => Operator::dense_gaussian(m, n, seed),
        OperatorKind::PartialOrthogonal => Operator::partial_orthogonal(n, m, seed),
    }
}

/// Draws `x` from the prior (unless `truth` is given), builds `A` and adds
/// noise, each from its own stream of `seed`.
pub fn generate(spec: &ProblemSpec, seed: u64, truth: Option<Vec<f64>>) -> Result<SyntheticProblem> {
    let x = match truth {
        Some(t) => {
            check_len("truth length vs n", spec.n, t.len())?;
            t
        }
        None => spec.prior.sample(spec.n, seed),
    };
    let op = build_operator(spec.operator_kind, spec.n, spec.m, seed)?;
    let mut y = op.apply(&x)?;
    let mut r = rng::stream(seed, rng::STREAM_NOISE);
    for yi in &mut y {
        let w: f64 = StandardNormal.sample(&mut r);
        *yi += spec.noise_std * w;
    }
    let problem = LmmseProblem::new(op, y, spec.noise_std * spec.noise_std)?;
    Ok(SyntheticProblem { truth: x, problem })
}
