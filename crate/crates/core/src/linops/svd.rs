use nalgebra::{DMatrix, DVector};

use super::LinearOperator;
use crate::error::{check_len, Error, Result};

const ORTHO_TOL: f64 = 1e-10;

/// Operator stored in factored form `A = U diag(s) Vᵀ`.
///
/// The factors are kept thin: `U` is `M × r` and `V` is `N × r` with
/// `r = min(M, N)`. Columns beyond `r` never touch `A` or `Aᵀ`.
#[derive(Debug, Clone)]
pub struct SvdOperator {
    u: DMatrix<f64>,
    singular_values: Vec<f64>,
    v: DMatrix<f64>,
}

impl SvdOperator {
    /// Validates factors: orthonormal columns, nonnegative nonincreasing
    /// finite singular values.
    pub fn from_parts(u: DMatrix<f64>, singular_values: Vec<f64>, v: DMatrix<f64>) -> Result<Self> {
        let r = singular_values.len();
        if r == 0 {
            return Err(Error::InvalidArgument("no singular values".into()));
        }
        check_len("svd: columns of U", r, u.ncols())?;
        check_len("svd: columns of V", r, v.ncols())?;
        if r != u.nrows().min(v.nrows()) {
            return Err(Error::InvalidArgument(format!(
                "expected min(M, N) = {} singular values, got {r}",
                u.nrows().min(v.nrows())
            )));
        }
        if singular_values.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::InvalidArgument(
                "singular values must be finite and nonnegative".into(),
            ));
        }
        if singular_values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument(
                "singular values must be nonincreasing".into(),
            ));
        }
        for (name, q) in [("U", &u), ("V", &v)] {
            let dev = orthonormality_defect(q);
            if !(dev <= ORTHO_TOL) {
                return Err(Error::InvalidArgument(format!(
                    "{name} columns not orthonormal (max |QᵀQ − I| = {dev:e})"
                )));
            }
        }
        Ok(Self {
            u,
            singular_values,
            v,
        })
    }

    /// Thin SVD of a dense matrix; `None` if the iteration budget is exhausted.
    pub fn decompose(matrix: &DMatrix<f64>, max_iters: usize) -> Option<Self> {
        let svd = matrix.clone().try_svd(true, true, f64::EPSILON, max_iters)?;
        let u = svd.u?;
        let v = svd.v_t?.transpose();
        let singular_values = svd.singular_values.iter().map(|s| s.max(0.0)).collect();
        Some(Self {
            u,
            singular_values,
            v,
        })
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub(crate) fn gram_spectrum_unchecked(&self) -> Vec<f64> {
        self.singular_values.iter().map(|s| s * s).collect()
    }

    /// `Uᵀ r`, length `r`.
    pub(crate) fn project_rows(&self, r: &[f64]) -> DVector<f64> {
        self.u.tr_mul(&DVector::from_column_slice(r))
    }

    /// `V c` for a coefficient vector of length `r`.
    pub(crate) fn expand_cols(&self, c: &DVector<f64>) -> Vec<f64> {
        (&self.v * c).data.into()
    }
}

fn orthonormality_defect(q: &DMatrix<f64>) -> f64 {
    let g = q.tr_mul(q);
    let mut worst: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

impl LinearOperator for SvdOperator {
    fn rows(&self) -> usize {
        self.u.nrows()
    }

    fn cols(&self) -> usize {
        self.v.nrows()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("apply: input length vs operator columns", self.cols(), x.len())?;
        let mut c = self.v.tr_mul(&DVector::from_column_slice(x));
        c.iter_mut()
            .zip(&self.singular_values)
            .for_each(|(ci, s)| *ci *= s);
        Ok((&self.u * c).data.into())
    }

    fn apply_adjoint(&self, r: &[f64]) -> Result<Vec<f64>> {
        check_len("apply_adjoint: input length vs operator rows", self.rows(), r.len())?;
        let mut c = self.project_rows(r);
        c.iter_mut()
            .zip(&self.singular_values)
            .for_each(|(ci, s)| *ci *= s);
        Ok(self.expand_cols(&c))
    }

    fn gram_spectrum(&self) -> Result<Vec<f64>> {
        Ok(self.gram_spectrum_unchecked())
    }
}
