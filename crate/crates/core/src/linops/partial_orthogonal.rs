use rand::Rng;

use super::dct::OrthoDct;
use super::LinearOperator;
use crate::error::{check_len, Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    /// Orthonormal DCT-II.
    DctIIOrthonormal,
}

/// `A = S W Θ`: random signs, an orthonormal transform, then row selection.
///
/// Rows of `A` are orthonormal, so `A Aᵀ = I_M`.
#[derive(Debug, Clone)]
pub struct PartialOrthogonalOperator {
    selection: Vec<usize>,
    signs: Vec<f64>,
    transform_kind: TransformKind,
    dct: OrthoDct,
}

impl PartialOrthogonalOperator {
    pub fn from_parts(selection: Vec<usize>, signs: Vec<f64>) -> Result<Self> {
        let n = signs.len();
        if n == 0 || selection.is_empty() {
            return Err(Error::InvalidArgument(
                "operator dimensions must be positive".into(),
            ));
        }
        if selection.len() > n {
            return Err(Error::InvalidArgument(format!(
                "cannot select {} rows from {n}",
                selection.len()
            )));
        }
        let mut seen = vec![false; n];
        for &i in &selection {
            if i >= n {
                return Err(Error::InvalidArgument(format!("row index {i} out of range [0, {n})")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidArgument(format!("row index {i} selected twice")));
            }
        }
        if signs.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(Error::InvalidArgument("signs must be ±1".into()));
        }
        Ok(Self {
            selection,
            signs,
            transform_kind: TransformKind::DctIIOrthonormal,
            dct: OrthoDct::new(n),
        })
    }

    /// Draws the row subset by partial Fisher–Yates and i.i.d. signs from the
    /// operator stream of `seed`.
    pub fn build(n: usize, m: usize, seed: u64) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidArgument(
                "operator dimensions must be positive".into(),
            ));
        }
        if m > n {
            return Err(Error::InvalidArgument(format!(
                "M = {m} exceeds N = {n} for a partial-orthogonal operator"
            )));
        }
        let mut r = rng::stream(seed, rng::STREAM_OPERATOR);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in 0..m {
            let j = r.random_range(i..n);
            perm.swap(i, j);
        }
        perm.truncate(m);
        let signs = (0..n)
            .map(|_| if r.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        Self::from_parts(perm, signs)
    }

    pub fn selection(&self) -> &[usize] {
        &self.selection
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn transform_kind(&self) -> TransformKind {
        self.transform_kind
    }
}

impl LinearOperator for PartialOrthogonalOperator {
    fn rows(&self) -> usize {
        self.selection.len()
    }

    fn cols(&self) -> usize {
        self.signs.len()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("apply: input length vs operator columns", self.cols(), x.len())?;
        let mut buf: Vec<f64> = x.iter().zip(&self.signs).map(|(a, s)| a * s).collect();
        self.dct.forward(&mut buf);
        Ok(self.selection.iter().map(|&i| buf[i]).collect())
    }

    fn apply_adjoint(&self, r: &[f64]) -> Result<Vec<f64>> {
        check_len("apply_adjoint: input length vs operator rows", self.rows(), r.len())?;
        let mut buf = vec![0.0; self.cols()];
        for (&i, &ri) in self.selection.iter().zip(r) {
            buf[i] = ri;
        }
        self.dct.inverse(&mut buf);
        buf.iter_mut().zip(&self.signs).for_each(|(b, s)| *b *= s);
        Ok(buf)
    }

    fn gram_spectrum(&self) -> Result<Vec<f64>> {
        Ok(vec![1.0; self.rows()])
    }
}
