use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

use super::{LinearOperator, SvdOperator};
use crate::error::{check_len, Error, Result};

const SVD_MAX_ITERS: usize = 100_000;

/// Explicit `M × N` measurement matrix. Its SVD is computed lazily on first
/// request and cached for the lifetime of the operator.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    matrix: DMatrix<f64>,
    svd: OnceLock<std::result::Result<Arc<SvdOperator>, usize>>,
}

impl DenseOperator {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::InvalidArgument(
                "operator dimensions must be positive".into(),
            ));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "dense operator entries".into(),
            });
        }
        Ok(Self {
            matrix,
            svd: OnceLock::new(),
        })
    }

    /// Builds from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        check_len("dense operator entries", rows * cols, entries.len())?;
        Self::new(DMatrix::from_row_slice(rows, cols, entries))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// The cached thin SVD, computing it on first use.
    pub fn svd(&self) -> Result<Arc<SvdOperator>> {
        self.svd
            .get_or_init(|| {
                SvdOperator::decompose(&self.matrix, SVD_MAX_ITERS)
                    .map(Arc::new)
                    .ok_or(SVD_MAX_ITERS)
            })
            .clone()
            .map_err(|iterations| Error::SvdNonConvergence { iterations })
    }
}

impl LinearOperator for DenseOperator {
    fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("apply: input length vs operator columns", self.cols(), x.len())?;
        let x = DVector::from_column_slice(x);
        Ok((&self.matrix * x).data.into())
    }

    fn apply_adjoint(&self, r: &[f64]) -> Result<Vec<f64>> {
        check_len("apply_adjoint: input length vs operator rows", self.rows(), r.len())?;
        let r = DVector::from_column_slice(r);
        Ok(self.matrix.tr_mul(&r).data.into())
    }

    fn gram_spectrum(&self) -> Result<Vec<f64>> {
        Ok(self.svd()?.gram_spectrum_unchecked())
    }
}
