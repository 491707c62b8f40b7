//! Linear measurement operators.
//!
//! Three realizations share the [`LinearOperator`] interface: an explicit
//! dense matrix, a factored SVD form, and the structured `A = S W Θ` ensemble
//! built from a fast orthonormal DCT. [`Operator`] wraps them so downstream
//! code can dispatch on the spectral structure each one exposes.

pub mod dct;
mod dense;
mod partial_orthogonal;
mod svd;

use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal};

pub use dense::DenseOperator;
pub use partial_orthogonal::{PartialOrthogonalOperator, TransformKind};
pub use svd::SvdOperator;

use crate::error::Result;
use crate::rng;

/// Real linear map `R^N → R^M`.
///
/// Implementations are immutable after construction and safe to share across
/// threads.
pub trait LinearOperator: Send + Sync {
    /// `M`.
    fn rows(&self) -> usize;
    /// `N`.
    fn cols(&self) -> usize;
    /// `A x`.
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// `Aᵀ r`.
    fn apply_adjoint(&self, r: &[f64]) -> Result<Vec<f64>>;
    /// Squared singular values, length `min(M, N)`.
    fn gram_spectrum(&self) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone)]
pub enum Operator {
    Dense(DenseOperator),
    Svd(SvdOperator),
    PartialOrthogonal(PartialOrthogonalOperator),
}

impl Operator {
    /// I.i.d. `N(0, 1/M)` entries drawn from the operator stream of `seed`.
    pub fn dense_gaussian(m: usize, n: usize, seed: u64) -> Result<Self> {
        let mut r = rng::stream(seed, rng::STREAM_OPERATOR);
        let dist = Normal::new(0.0, (1.0 / m.max(1) as f64).sqrt()).expect("positive std");
        let entries: Vec<f64> = (0..m * n).map(|_| dist.sample(&mut r)).collect();
        Ok(Operator::Dense(DenseOperator::from_row_major(m, n, &entries)?))
    }

    pub fn partial_orthogonal(n: usize, m: usize, seed: u64) -> Result<Self> {
        Ok(Operator::PartialOrthogonal(PartialOrthogonalOperator::build(
            n, m, seed,
        )?))
    }

    fn inner(&self) -> &dyn LinearOperator {
        match self {
            Operator::Dense(op) => op,
            Operator::Svd(op) => op,
            Operator::PartialOrthogonal(op) => op,
        }
    }

    /// Materializes `A` column by column.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        if let Operator::Dense(op) = self {
            return Ok(op.matrix().clone());
        }
        let (m, n) = (self.rows(), self.cols());
        let mut a = DMatrix::zeros(m, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.apply(&e)?;
            a.column_mut(j).copy_from_slice(&col);
            e[j] = 0.0;
        }
        Ok(a)
    }
}

impl LinearOperator for Operator {
    fn rows(&self) -> usize {
        self.inner().rows()
    }

    fn cols(&self) -> usize {
        self.inner().cols()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.inner().apply(x)
    }

    fn apply_adjoint(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.inner().apply_adjoint(r)
    }

    fn gram_spectrum(&self) -> Result<Vec<f64>> {
        self.inner().gram_spectrum()
    }
}
