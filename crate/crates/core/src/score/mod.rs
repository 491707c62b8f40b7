//! Score models and the Tweedie denoiser built on them.
//!
//! A [`ScoreModel`] approximates `∇ log p(x̃)` of the noise-perturbed data at
//! noise level `σ`; a [`TraceScoreModel`] approximates the trace of the
//! Hessian of the same log-density. Given both, the posterior mean and the
//! average posterior variance of an AWGN observation follow from Tweedie's
//! identities (see [`tweedie_denoise`]).

mod dsm;
mod grid;

use serde::{Deserialize, Serialize};

pub use dsm::{
    dsm_loss1, dsm_loss1_estimate, dsm_loss2, dsm_loss2_estimate, dsm_unified, fit_affine_score,
    fit_constant_trace, DsmDataset, DsmObjective, LossEstimate, Weighting,
};
pub use grid::SigmaGrid;

use crate::error::{Error, Result};
use crate::messages::GaussianMessage;
use crate::priors::GmmPrior;

/// First-order score field `s(x̃, σ) ≈ ∇ log p_σ(x̃)`.
pub trait ScoreModel: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, x: &[f64], sigma: f64) -> Vec<f64>;
}

/// Trace of the second-order score, `tr ∇² log p_σ(x̃)`.
pub trait TraceScoreModel: Send + Sync {
    fn name(&self) -> &str;
    fn trace(&self, x: &[f64], sigma: f64) -> f64;
}

/// Exact coordinatewise score of a mixture prior.
#[derive(Debug, Clone)]
pub struct AnalyticGmmScore {
    prior: GmmPrior,
}

impl AnalyticGmmScore {
    pub fn new(prior: GmmPrior) -> Self {
        Self { prior }
    }
}

impl ScoreModel for AnalyticGmmScore {
    fn name(&self) -> &str {
        "analytic-gmm"
    }

    fn score(&self, x: &[f64], sigma: f64) -> Vec<f64> {
        match self.prior.perturbed(sigma * sigma) {
            Ok(p) => x.iter().map(|&xi| p.score1(xi)).collect(),
            Err(_) => vec![f64::NAN; x.len()],
        }
    }
}

/// Exact Hessian trace of a mixture prior.
#[derive(Debug, Clone)]
pub struct AnalyticGmmTrace {
    prior: GmmPrior,
}

impl AnalyticGmmTrace {
    pub fn new(prior: GmmPrior) -> Self {
        Self { prior }
    }
}

impl TraceScoreModel for AnalyticGmmTrace {
    fn name(&self) -> &str {
        "analytic-gmm-trace"
    }

    fn trace(&self, x: &[f64], sigma: f64) -> f64 {
        match self.prior.perturbed(sigma * sigma) {
            Ok(p) => x.iter().map(|&xi| p.score2(xi)).sum(),
            Err(_) => f64::NAN,
        }
    }
}

/// `s ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroScore;

impl ScoreModel for ZeroScore {
    fn name(&self) -> &str {
        "zero"
    }

    fn score(&self, x: &[f64], _sigma: f64) -> Vec<f64> {
        vec![0.0; x.len()]
    }
}

impl TraceScoreModel for ZeroScore {
    fn name(&self) -> &str {
        "zero"
    }

    fn trace(&self, _x: &[f64], _sigma: f64) -> f64 {
        0.0
    }
}

/// Adds a constant to every score component. Used for negative controls.
pub struct OffsetScore<M> {
    pub inner: M,
    pub offset: f64,
}

impl<M: ScoreModel> ScoreModel for OffsetScore<M> {
    fn name(&self) -> &str {
        "offset"
    }

    fn score(&self, x: &[f64], sigma: f64) -> Vec<f64> {
        let mut s = self.inner.score(x, sigma);
        s.iter_mut().for_each(|v| *v += self.offset);
        s
    }
}

/// Per-coordinate `s(x̃, σ) = a(σ) x̃ + b(σ)`, coefficients interpolated
/// linearly in `σ` between grid nodes and held constant outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineScore {
    pub sigma_grid: SigmaGrid,
    pub slope: Vec<f64>,
    pub intercept: Vec<f64>,
}

impl AffineScore {
    pub fn new(sigma_grid: SigmaGrid, slope: Vec<f64>, intercept: Vec<f64>) -> Result<Self> {
        if slope.len() != sigma_grid.len() || intercept.len() != sigma_grid.len() {
            return Err(Error::InvalidArgument(
                "affine coefficients must match the sigma grid".into(),
            ));
        }
        Ok(Self {
            sigma_grid,
            slope,
            intercept,
        })
    }

    pub fn coefficients(&self, sigma: f64) -> (f64, f64) {
        (
            self.sigma_grid.interpolate(&self.slope, sigma),
            self.sigma_grid.interpolate(&self.intercept, sigma),
        )
    }
}

impl ScoreModel for AffineScore {
    fn name(&self) -> &str {
        "affine"
    }

    fn score(&self, x: &[f64], sigma: f64) -> Vec<f64> {
        let (a, b) = self.coefficients(sigma);
        x.iter().map(|xi| a * xi + b).collect()
    }
}

/// Input-independent trace `c(σ)`, fitted at dimension `dim` and scaled
/// linearly to the evaluated dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantTrace {
    pub sigma_grid: SigmaGrid,
    pub values: Vec<f64>,
    pub dim: usize,
}

impl ConstantTrace {
    pub fn new(sigma_grid: SigmaGrid, values: Vec<f64>, dim: usize) -> Result<Self> {
        if values.len() != sigma_grid.len() || dim == 0 {
            return Err(Error::InvalidArgument(
                "trace values must match the sigma grid".into(),
            ));
        }
        Ok(Self {
            sigma_grid,
            values,
            dim,
        })
    }

    /// `c(σ)` at the fitted dimension.
    pub fn value(&self, sigma: f64) -> f64 {
        self.sigma_grid.interpolate(&self.values, sigma)
    }
}

impl TraceScoreModel for ConstantTrace {
    fn name(&self) -> &str {
        "constant-trace"
    }

    fn trace(&self, x: &[f64], sigma: f64) -> f64 {
        self.value(sigma) * x.len() as f64 / self.dim as f64
    }
}

/// Output of [`tweedie_denoise`].
#[derive(Debug, Clone, PartialEq)]
pub struct Denoised {
    pub message: GaussianMessage,
    /// The trace model fell below `−N/σ²` and was raised to it.
    pub trace_clamped: bool,
    /// The variance fell below `1e−6 · v_pri` and was raised to it.
    pub variance_clamped: bool,
}

/// Relative floor on the denoiser's posterior variance.
pub const POSTERIOR_VARIANCE_FLOOR: f64 = 1e-6;

/// Posterior mean `x + v s(x, √v)` and variance `v + (v²/N) tr S(x, √v)`
/// for the pseudo-observation `x = x_true + N(0, v I)`.
pub fn tweedie_denoise(
    model: &dyn ScoreModel,
    trace_model: &dyn TraceScoreModel,
    pri: &GaussianMessage,
) -> Result<Denoised> {
    let v = pri.variance;
    if !(v > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "prior variance must be positive, got {v}"
        )));
    }
    let n = pri.dim() as f64;
    let sigma = v.sqrt();
    let score = model.score(&pri.mean, sigma);
    if score.len() != pri.dim() || score.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("score model '{}'", model.name()),
        });
    }
    let mut trace = trace_model.trace(&pri.mean, sigma);
    if !trace.is_finite() {
        return Err(Error::NonFinite {
            context: format!("trace model '{}'", trace_model.name()),
        });
    }
    let floor = -n / v;
    let trace_clamped = trace < floor;
    if trace_clamped {
        trace = floor;
    }
    let mean = pri
        .mean
        .iter()
        .zip(&score)
        .map(|(x, s)| x + v * s)
        .collect();
    let mut variance = v * v / n * trace + v;
    let variance_clamped = variance < POSTERIOR_VARIANCE_FLOOR * v;
    if variance_clamped {
        variance = POSTERIOR_VARIANCE_FLOOR * v;
    }
    Ok(Denoised {
        message: GaussianMessage { mean, variance },
        trace_clamped,
        variance_clamped,
    })
}
