//! Linear MMSE module: combines the Gaussian likelihood `N(y; Ax, δ0² I)`
//! with an isotropic Gaussian pseudo-prior.
//!
//! Three backends compute the same posterior:
//!
//! * [`LmmseBackend::Diagonal`] for row-orthonormal operators, where
//!   `v AAᵀ + δ0² I = (v + δ0²) I`;
//! * [`LmmseBackend::Spectral`] through a thin SVD computed once when the
//!   problem is built;
//! * [`LmmseBackend::Direct`], a Cholesky solve against `v AAᵀ + δ0² I`
//!   formed every call. It is slow and exists as a cross-check.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, ensure_finite, Error, Result};
use crate::linops::{LinearOperator, Operator, SvdOperator};
use crate::messages::GaussianMessage;

/// Noise variances below this are raised to it.
pub const NOISE_VAR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LmmseBackend {
    Diagonal,
    Spectral,
    Direct,
}

#[derive(Debug)]
pub struct LmmseProblem {
    operator: Operator,
    y: Vec<f64>,
    noise_var: f64,
    svd: Option<Arc<SvdOperator>>,
    dense: OnceLock<(DMatrix<f64>, DMatrix<f64>)>,
}

impl LmmseProblem {
    /// Validates inputs and precomputes the SVD for dense operators.
    pub fn new(operator: Operator, y: Vec<f64>, noise_var: f64) -> Result<Self> {
        check_len("lmmse: measurement length vs operator rows", operator.rows(), y.len())?;
        ensure_finite(|| "measurements".into(), &y)?;
        if !(noise_var >= 0.0) || !noise_var.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be finite and nonnegative, got {noise_var}"
            )));
        }
        let svd = match &operator {
            Operator::Dense(op) => Some(op.svd()?),
            Operator::Svd(op) => Some(Arc::new(op.clone())),
            Operator::PartialOrthogonal(_) => None,
        };
        Ok(Self {
            operator,
            y,
            noise_var: noise_var.max(NOISE_VAR_FLOOR),
            svd,
            dense: OnceLock::new(),
        })
    }

    pub fn operator(&self) -> &Operator {
        &self.operator
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Floored noise variance actually used.
    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn rows(&self) -> usize {
        self.operator.rows()
    }

    pub fn cols(&self) -> usize {
        self.operator.cols()
    }

    pub fn default_backend(&self) -> LmmseBackend {
        match self.operator {
            Operator::PartialOrthogonal(_) => LmmseBackend::Diagonal,
            _ => LmmseBackend::Spectral,
        }
    }

    /// Squared singular values (cached for dense operators).
    pub fn gram_spectrum(&self) -> Vec<f64> {
        match &self.svd {
            Some(svd) => svd.singular_values().iter().map(|s| s * s).collect(),
            None => vec![1.0; self.rows()],
        }
    }

    /// `tr(Aᵀ (v AAᵀ + δ0² I)⁻¹ A)` from the spectrum.
    pub fn spectral_trace(&self, v_pri: f64) -> f64 {
        spectral_trace(&self.gram_spectrum(), v_pri, self.noise_var)
    }

    fn dense_parts(&self) -> Result<&(DMatrix<f64>, DMatrix<f64>)> {
        if let Some(parts) = self.dense.get() {
            return Ok(parts);
        }
        let a = self.operator.to_dense()?;
        let gram = &a * a.transpose();
        Ok(self.dense.get_or_init(|| (a, gram)))
    }

    fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        let ax = self.operator.apply(x)?;
        Ok(self.y.iter().zip(&ax).map(|(y, a)| y - a).collect())
    }

    /// Posterior under the pseudo-prior, using [`default_backend`](Self::default_backend).
    pub fn posterior(&self, pri: &GaussianMessage) -> Result<GaussianMessage> {
        self.posterior_with(pri, self.default_backend())
    }

    pub fn posterior_with(
        &self,
        pri: &GaussianMessage,
        backend: LmmseBackend,
    ) -> Result<GaussianMessage> {
        check_len("lmmse: prior mean vs operator columns", self.cols(), pri.dim())?;
        let v = pri.variance;
        if !(v > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "prior variance must be positive, got {v}"
            )));
        }
        let n = self.cols() as f64;
        let d2 = self.noise_var;
        let (mut mean, trace) = match backend {
            LmmseBackend::Diagonal => {
                if !matches!(self.operator, Operator::PartialOrthogonal(_)) {
                    return Err(Error::InvalidArgument(
                        "diagonal backend requires a row-orthonormal operator".into(),
                    ));
                }
                let r = self.residual(&pri.mean)?;
                let mut step = self.operator.apply_adjoint(&r)?;
                let gain = v / (v + d2);
                step.iter_mut().for_each(|s| *s *= gain);
                (step, self.rows() as f64 / (v + d2))
            }
            LmmseBackend::Spectral => {
                let svd = self.svd.as_ref().ok_or_else(|| {
                    Error::InvalidArgument("spectral backend requires an SVD".into())
                })?;
                let r: Vec<f64> = {
                    let ax = svd.apply(&pri.mean)?;
                    self.y.iter().zip(&ax).map(|(y, a)| y - a).collect()
                };
                let mut c = svd.project_rows(&r);
                let mut trace = 0.0;
                for (ci, &s) in c.iter_mut().zip(svd.singular_values()) {
                    let denom = v * s * s + d2;
                    *ci *= v * s / denom;
                    trace += s * s / denom;
                }
                (svd.expand_cols(&c), trace)
            }
            LmmseBackend::Direct => {
                let (a, gram) = self.dense_parts()?;
                let mut g = gram * v;
                for i in 0..g.nrows() {
                    g[(i, i)] += d2;
                }
                let chol = g.cholesky().ok_or_else(|| {
                    Error::InvalidArgument("v·AAᵀ + δ0²·I is not positive definite".into())
                })?;
                let r = DVector::from_vec(self.residual(&pri.mean)?);
                let w = chol.solve(&r);
                let step: Vec<f64> = (a.tr_mul(&w) * v).data.into();
                let g_inv = chol.inverse();
                // tr(G⁻¹ AAᵀ) = Σ_ij G⁻¹_ij (AAᵀ)_ji, both symmetric.
                let trace = g_inv.component_mul(gram).sum();
                (step, trace)
            }
        };
        for (m, x) in mean.iter_mut().zip(&pri.mean) {
            *m += x;
        }
        let variance = v - v * v / n * trace;
        ensure_finite(|| format!("LMMSE posterior ({backend:?} backend)"), &mean)?;
        if !variance.is_finite() {
            return Err(Error::NonFinite {
                context: format!("LMMSE posterior variance ({backend:?} backend)"),
            });
        }
        Ok(GaussianMessage { mean, variance })
    }

    /// Exact Gaussian posterior under the prior `N(μ, τ² I)`:
    /// covariance `(AᵀA/δ0² + I/τ²)⁻¹`, mean `Cov (Aᵀy/δ0² + μ/τ²)`.
    pub fn exact_joint(&self, prior_mean: &[f64], prior_var: f64) -> Result<JointPosterior> {
        check_len("exact joint: prior mean vs operator columns", self.cols(), prior_mean.len())?;
        if !(prior_var > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "prior variance must be positive, got {prior_var}"
            )));
        }
        let (a, _) = self.dense_parts()?;
        let d2 = self.noise_var;
        let mut h = a.tr_mul(a) / d2;
        for i in 0..h.nrows() {
            h[(i, i)] += 1.0 / prior_var;
        }
        let chol = h.cholesky().ok_or_else(|| {
            Error::InvalidArgument("posterior precision is not positive definite".into())
        })?;
        let rhs = a.tr_mul(&DVector::from_column_slice(&self.y)) / d2
            + DVector::from_column_slice(prior_mean) / prior_var;
        let mean: Vec<f64> = chol.solve(&rhs).data.into();
        let covariance = chol.inverse();
        Ok(JointPosterior { mean, covariance })
    }
}

/// Posterior mean and covariance of the exact Gaussian model.
#[derive(Debug, Clone)]
pub struct JointPosterior {
    pub mean: Vec<f64>,
    pub covariance: DMatrix<f64>,
}

impl JointPosterior {
    /// `tr(Cov)/N`.
    pub fn average_variance(&self) -> f64 {
        self.covariance.trace() / self.covariance.nrows() as f64
    }
}

/// `Σ sᵢ² / (v sᵢ² + δ0²)`.
pub fn spectral_trace(gram_spectrum: &[f64], v_pri: f64, noise_var: f64) -> f64 {
    gram_spectrum.iter().map(|s2| s2 / (v_pri * s2 + noise_var)).sum()
}

/// Free-function form of [`LmmseProblem::posterior`].
pub fn lmmse_posterior(problem: &LmmseProblem, pri: &GaussianMessage) -> Result<GaussianMessage> {
    problem.posterior(pri)
}

/// Free-function form of [`LmmseProblem::exact_joint`].
pub fn lmmse_exact_joint(
    problem: &LmmseProblem,
    prior_mean: &[f64],
    prior_var: f64,
) -> Result<JointPosterior> {
    problem.exact_joint(prior_mean, prior_var)
}
