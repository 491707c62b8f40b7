//! Denoising score matching: Monte-Carlo objectives and closed-form fits
//! for the affine and constant-trace families.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{AffineScore, ConstantTrace, ScoreModel, SigmaGrid, TraceScoreModel};
use crate::error::{Error, Result};
use crate::priors::GmmPrior;
use crate::rng;

/// Clean training samples, row-major `n × dim`, plus the noise levels and
/// the seed of the synthetic-noise stream.
#[derive(Debug, Clone)]
pub struct DsmDataset {
    clean: Vec<f64>,
    dim: usize,
    sigma_grid: SigmaGrid,
    noise_seed: u64,
}

impl DsmDataset {
    pub fn new(clean: Vec<f64>, dim: usize, sigma_grid: SigmaGrid, noise_seed: u64) -> Result<Self> {
        if dim == 0 || clean.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if clean.len() % dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} values do not form rows of length {dim}",
                clean.len()
            )));
        }
        Ok(Self {
            clean,
            dim,
            sigma_grid,
            noise_seed,
        })
    }

    /// `n` rows of i.i.d. prior draws.
    pub fn from_prior(
        prior: &GmmPrior,
        n: usize,
        dim: usize,
        sigma_grid: SigmaGrid,
        seed: u64,
    ) -> Result<Self> {
        let clean = prior.sample_stream(n * dim, seed, rng::STREAM_PRIOR_SAMPLES);
        Self::new(clean, dim, sigma_grid, rng::mix64(seed))
    }

    pub fn samples(&self) -> usize {
        self.clean.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sigma_grid(&self) -> &SigmaGrid {
        &self.sigma_grid
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.clean.chunks_exact(self.dim)
    }

    /// Standard-normal noise for level `sigma`; a fixed function of the noise
    /// seed and `sigma`.
    fn noise(&self, sigma: f64) -> Vec<f64> {
        let seed = rng::hash_words(&[self.noise_seed, sigma.to_bits()]);
        let mut r = rng::stream(seed, rng::STREAM_DSM_NOISE);
        (0..self.clean.len())
            .map(|_| StandardNormal.sample(&mut r))
            .collect()
    }

    /// Noisy copies `x + σ w` alongside the unit noise `w`.
    fn perturb(&self, sigma: f64) -> (Vec<f64>, Vec<f64>) {
        let w = self.noise(sigma);
        let noisy = self.clean.iter().zip(&w).map(|(x, z)| x + sigma * z).collect();
        (noisy, w)
    }

    /// Dataset with every row repeated `times` times.
    pub fn repeated(&self, times: usize) -> Self {
        let mut clean = Vec::with_capacity(self.clean.len() * times);
        for _ in 0..times {
            clean.extend_from_slice(&self.clean);
        }
        Self {
            clean,
            ..self.clone()
        }
    }
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossEstimate {
    pub value: f64,
    pub std_err: f64,
}

fn estimate(per_sample: &[f64]) -> LossEstimate {
    let n = per_sample.len() as f64;
    let mean = per_sample.iter().sum::<f64>() / n;
    let var = if per_sample.len() > 1 {
        per_sample.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    LossEstimate {
        value: mean,
        std_err: (var / n).sqrt(),
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")))
    }
}

/// `b̂ = s(x̃, σ) + (x̃ − x)/σ² = s(x̃, σ) + w/σ` for every row.
fn residual_rows<'a>(
    model: &'a dyn ScoreModel,
    data: &'a DsmDataset,
    noisy: &'a [f64],
    w: &'a [f64],
    sigma: f64,
) -> impl Iterator<Item = (&'a [f64], Vec<f64>)> + 'a {
    noisy
        .chunks_exact(data.dim)
        .zip(w.chunks_exact(data.dim))
        .map(move |(xt, wr)| {
            let s = model.score(xt, sigma);
            let b = s.iter().zip(wr).map(|(si, wi)| si + wi / sigma).collect();
            (xt, b)
        })
}

/// First-order objective `E‖s(x̃, σ) + (x̃ − x)/σ²‖²` with its standard error.
pub fn dsm_loss1_estimate(
    model: &dyn ScoreModel,
    data: &DsmDataset,
    sigma: f64,
) -> Result<LossEstimate> {
    check_sigma(sigma)?;
    let (noisy, w) = data.perturb(sigma);
    let per: Vec<f64> = residual_rows(model, data, &noisy, &w, sigma)
        .map(|(_, b)| b.iter().map(|v| v * v).sum())
        .collect();
    Ok(estimate(&per))
}

pub fn dsm_loss1(model: &dyn ScoreModel, data: &DsmDataset, sigma: f64) -> Result<f64> {
    dsm_loss1_estimate(model, data, sigma).map(|e| e.value)
}

/// Trace objective `E|tr S(x̃, σ) − ‖b̂‖² + N/σ²|²`, with `b̂` built from the
/// supplied first-order model.
pub fn dsm_loss2_estimate(
    trace_model: &dyn TraceScoreModel,
    first_order: &dyn ScoreModel,
    data: &DsmDataset,
    sigma: f64,
) -> Result<LossEstimate> {
    check_sigma(sigma)?;
    let (noisy, w) = data.perturb(sigma);
    let n_over = data.dim as f64 / (sigma * sigma);
    let per: Vec<f64> = residual_rows(first_order, data, &noisy, &w, sigma)
        .map(|(xt, b)| {
            let r = trace_model.trace(xt, sigma) - b.iter().map(|v| v * v).sum::<f64>() + n_over;
            r * r
        })
        .collect();
    Ok(estimate(&per))
}

pub fn dsm_loss2(
    trace_model: &dyn TraceScoreModel,
    first_order: &dyn ScoreModel,
    data: &DsmDataset,
    sigma: f64,
) -> Result<f64> {
    dsm_loss2_estimate(trace_model, first_order, data, sigma).map(|e| e.value)
}

/// Per-level weights `λ(σ)` of the unified objective.
#[derive(Debug, Clone, PartialEq)]
pub enum Weighting {
    /// `λ(σ) = σ^p`.
    SigmaPower(i32),
    /// Explicit `(σ, λ)` pairs; every grid level must appear.
    Table(Vec<(f64, f64)>),
}

impl Weighting {
    /// `λ₁(σ) = σ²`.
    pub fn first_order_default() -> Self {
        Weighting::SigmaPower(2)
    }

    /// `λ₂(σ) = σ⁴`.
    pub fn second_order_default() -> Self {
        Weighting::SigmaPower(4)
    }

    pub fn weight(&self, sigma: f64) -> Result<f64> {
        match self {
            Weighting::SigmaPower(p) => Ok(sigma.powi(*p)),
            Weighting::Table(t) => t
                .iter()
                .find(|(s, _)| *s == sigma)
                .map(|(_, w)| *w)
                .ok_or(Error::MissingWeight { sigma }),
        }
    }
}

#[derive(Clone, Copy)]
pub enum DsmObjective<'a> {
    First(&'a dyn ScoreModel),
    Second {
        trace: &'a dyn TraceScoreModel,
        first: &'a dyn ScoreModel,
    },
}

/// `(1/L) Σᵢ λ(σᵢ) ℓ(σᵢ)` over the dataset's grid.
pub fn dsm_unified(objective: DsmObjective<'_>, data: &DsmDataset, weighting: &Weighting) -> Result<f64> {
    let grid = data.sigma_grid.values();
    let mut total = 0.0;
    for &sigma in grid {
        let lambda = weighting.weight(sigma)?;
        let loss = match objective {
            DsmObjective::First(m) => dsm_loss1(m, data, sigma)?,
            DsmObjective::Second { trace, first } => dsm_loss2(trace, first, data, sigma)?,
        };
        total += lambda * loss;
    }
    Ok(total / grid.len() as f64)
}

/// Least-squares fit of `a(σ)·x̃ + b(σ)` to the targets `−(x̃ − x)/σ²`, pooled
/// over coordinates, independently at every grid level.
pub fn fit_affine_score(data: &DsmDataset) -> Result<AffineScore> {
    if data.samples() < 3 {
        return Err(Error::InvalidArgument(format!(
            "affine fit needs at least 3 samples, got {}",
            data.samples()
        )));
    }
    let coeffs: Vec<(f64, f64)> = data
        .sigma_grid
        .values()
        .par_iter()
        .map(|&sigma| {
            let (noisy, w) = data.perturb(sigma);
            let n = noisy.len() as f64;
            let mean_x = noisy.iter().sum::<f64>() / n;
            let mean_t = w.iter().map(|wi| -wi / sigma).sum::<f64>() / n;
            let (mut sxx, mut sxt) = (0.0, 0.0);
            for (x, wi) in noisy.iter().zip(&w) {
                let dx = x - mean_x;
                sxx += dx * dx;
                sxt += dx * (-wi / sigma - mean_t);
            }
            if !(sxx > 0.0) {
                return Err(Error::DegenerateDesign { sigma });
            }
            let a = sxt / sxx;
            Ok((a, mean_t - a * mean_x))
        })
        .collect::<Result<_>>()?;
    let (slope, intercept) = coeffs.into_iter().unzip();
    AffineScore::new(data.sigma_grid.clone(), slope, intercept)
}

/// Per-level constant minimizing the trace objective: the sample mean of
/// `‖b̂‖² − N/σ²` with the first-order model held fixed.
pub fn fit_constant_trace(data: &DsmDataset, first_order: &dyn ScoreModel) -> Result<ConstantTrace> {
    if data.samples() < 3 {
        return Err(Error::InvalidArgument(format!(
            "trace fit needs at least 3 samples, got {}",
            data.samples()
        )));
    }
    let values: Vec<f64> = data
        .sigma_grid
        .values()
        .par_iter()
        .map(|&sigma| {
            let (noisy, w) = data.perturb(sigma);
            let n_over = data.dim as f64 / (sigma * sigma);
            let per: Vec<f64> = residual_rows(first_order, data, &noisy, &w, sigma)
                .map(|(_, b)| b.iter().map(|v| v * v).sum::<f64>() - n_over)
                .collect();
            let c = estimate(&per).value;
            if c.is_finite() {
                Ok(c)
            } else {
                Err(Error::NonFinite {
                    context: format!("constant-trace fit at sigma = {sigma}"),
                })
            }
        })
        .collect::<Result<_>>()?;
    ConstantTrace::new(data.sigma_grid.clone(), values, data.dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::{AnalyticGmmScore, AnalyticGmmTrace, ZeroScore};

    fn grid(v: &[f64]) -> SigmaGrid {
        SigmaGrid::new(v.to_vec()).unwrap()
    }

    #[test]
    fn empty_dataset_rejected() {
        assert!(matches!(
            DsmDataset::new(vec![], 1, grid(&[1.0]), 0),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn point_mass_trace_residual_is_zero() {
        let prior = GmmPrior::gaussian(0.0, 0.0).unwrap();
        let data = DsmDataset::from_prior(&prior, 50, 3, grid(&[1.0]), 1).unwrap();
        let loss = dsm_loss2(
            &AnalyticGmmTrace::new(prior.clone()),
            &AnalyticGmmScore::new(prior),
            &data,
            1.0,
        )
        .unwrap();
        assert!(loss < 1e-20, "{loss}");
    }

    #[test]
    fn missing_weight_is_an_error() {
        let prior = GmmPrior::gaussian(0.0, 1.0).unwrap();
        let data = DsmDataset::from_prior(&prior, 10, 1, grid(&[0.5, 1.0]), 1).unwrap();
        let w = Weighting::Table(vec![(0.5, 1.0)]);
        assert!(matches!(
            dsm_unified(DsmObjective::First(&ZeroScore), &data, &w),
            Err(Error::MissingWeight { sigma }) if sigma == 1.0
        ));
    }

    #[test]
    fn unified_with_single_level() {
        let prior = GmmPrior::gaussian(0.0, 1.0).unwrap();
        let data = DsmDataset::from_prior(&prior, 100, 2, grid(&[0.7]), 3).unwrap();
        let l = dsm_loss1(&ZeroScore, &data, 0.7).unwrap();
        let u = dsm_unified(DsmObjective::First(&ZeroScore), &data, &Weighting::SigmaPower(2)).unwrap();
        assert!((u - 0.49 * l).abs() < 1e-12 * l);
    }

    #[test]
    fn point_mass_affine_fit_recovers_pure_noise_score() {
        let prior = GmmPrior::gaussian(0.0, 0.0).unwrap();
        let data = DsmDataset::from_prior(&prior, 1000, 2, grid(&[1.0]), 5).unwrap();
        let fit = fit_affine_score(&data).unwrap();
        // With x = 0 the targets are exactly −x̃: zero residual.
        assert!((fit.slope[0] + 1.0).abs() < 1e-12);
        assert!(fit.intercept[0].abs() < 1e-12);
    }

    #[test]
    fn too_few_samples() {
        let prior = GmmPrior::gaussian(0.0, 1.0).unwrap();
        let data = DsmDataset::from_prior(&prior, 2, 1, grid(&[1.0]), 5).unwrap();
        assert!(fit_affine_score(&data).is_err());
    }
}
