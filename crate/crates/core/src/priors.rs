//! I.i.d. scalar Gaussian-mixture priors.
//!
//! Convolving a mixture with Gaussian noise keeps it a mixture, so the
//! noisy-observation score, its derivative and the posterior moments all have
//! closed forms. [`PerturbedGmm::quadrature`] recomputes the posterior
//! moments by brute-force integration as an independent check.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::AdaptiveIntegrator;
use crate::rng;

/// Weight-sum tolerance.
const SIMPLEX_TOL: f64 = 1e-12;

/// Mixture `Σₖ wₖ N(μₖ, τₖ²)`; `τₖ² = 0` denotes a point mass at `μₖ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGmm", into = "RawGmm")]
pub struct GmmPrior {
    weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGmm {
    weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
}

impl TryFrom<RawGmm> for GmmPrior {
    type Error = Error;

    fn try_from(raw: RawGmm) -> Result<Self> {
        GmmPrior::new(raw.weights, raw.means, raw.variances)
    }
}

impl From<GmmPrior> for RawGmm {
    fn from(p: GmmPrior) -> Self {
        RawGmm {
            weights: p.weights,
            means: p.means,
            variances: p.variances,
        }
    }
}

impl GmmPrior {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::InvalidArgument("mixture needs at least one component".into()));
        }
        if means.len() != k || variances.len() != k {
            return Err(Error::InvalidArgument(format!(
                "mixture arrays differ in length: {} weights, {} means, {} variances",
                k,
                means.len(),
                variances.len()
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("mixture weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidArgument(format!(
                "mixture weights sum to {total}, not 1"
            )));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidArgument("mixture means must be finite".into()));
        }
        if variances.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "mixture variances must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            weights,
            means,
            variances,
        })
    }

    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![mean], vec![variance])
    }

    /// Spike at zero with probability `1 − rho`, `N(0, slab_var)` otherwise.
    pub fn bernoulli_gaussian(rho: f64, slab_var: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "sparsity must lie in (0, 1), got {rho}"
            )));
        }
        Self::new(vec![1.0 - rho, rho], vec![0.0, 0.0], vec![0.0, slab_var])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    /// `Σ wₖ (μₖ² + τₖ²)`.
    pub fn second_moment(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.variances)
            .map(|((w, m), v)| w * (m * m + v))
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.means).map(|(w, m)| w * m).sum()
    }

    /// `true` for a single Gaussian component.
    pub fn is_gaussian(&self) -> bool {
        self.components() == 1
    }

    /// `n` i.i.d. draws from the signal stream of `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        self.sample_stream(n, seed, rng::STREAM_SIGNAL)
    }

    pub(crate) fn sample_stream(&self, n: usize, seed: u64, stream: u64) -> Vec<f64> {
        let mut r = rng::stream(seed, stream);
        let last = self.components() - 1;
        (0..n)
            .map(|_| {
                let u: f64 = r.random();
                let mut acc = 0.0;
                let mut k = last;
                for (i, w) in self.weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        k = i;
                        break;
                    }
                }
                let z: f64 = r.sample(StandardNormal);
                if self.variances[k] == 0.0 {
                    self.means[k]
                } else {
                    self.means[k] + self.variances[k].sqrt() * z
                }
            })
            .collect()
    }

    pub fn perturbed(&self, sigma2: f64) -> Result<PerturbedGmm> {
        PerturbedGmm::new(self.clone(), sigma2)
    }
}

/// Law of `x + w`, `x ~ prior`, `w ~ N(0, σ²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedGmm {
    base: GmmPrior,
    sigma2: f64,
}

/// Posterior moments of `x` given one noisy observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorMoments {
    pub mean: f64,
    pub var: f64,
}

impl PerturbedGmm {
    pub fn new(base: GmmPrior, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be positive and finite, got {sigma2}"
            )));
        }
        Ok(Self { base, sigma2 })
    }

    pub fn base(&self) -> &GmmPrior {
        &self.base
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Log of each weighted component density at `x`, and the component
    /// variances `τₖ² + σ²`.
    fn log_terms(&self, x: f64) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let s2 = self.sigma2;
        self.base
            .weights
            .iter()
            .zip(&self.base.means)
            .zip(&self.base.variances)
            .map(move |((w, m), v)| {
                let s = v + s2;
                let d = x - m;
                (w.ln() - 0.5 * (2.0 * PI * s).ln() - d * d / (2.0 * s), *m, s)
            })
    }

    /// Normalized responsibilities with `(μₖ, τₖ² + σ²)`.
    fn responsibilities(&self, x: f64) -> (Vec<(f64, f64, f64)>, f64) {
        let terms: Vec<_> = self.log_terms(x).collect();
        let peak = terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        let mut out: Vec<_> = terms
            .into_iter()
            .map(|(l, m, s)| {
                let e = (l - peak).exp();
                total += e;
                (e, m, s)
            })
            .collect();
        out.iter_mut().for_each(|t| t.0 /= total);
        (out, peak + total.ln())
    }

    pub fn log_density(&self, x: f64) -> f64 {
        self.responsibilities(x).1
    }

    /// `d/dx log p(x) = Σ rₖ (μₖ − x)/(τₖ² + σ²)`.
    pub fn score1(&self, x: f64) -> f64 {
        self.responsibilities(x)
            .0
            .iter()
            .map(|(r, m, s)| r * (m - x) / s)
            .sum()
    }

    /// `d²/dx² log p(x) = Σ rₖ (gₖ² − 1/sₖ) − (Σ rₖ gₖ)²` with
    /// `gₖ = (μₖ − x)/sₖ`.
    pub fn score2(&self, x: f64) -> f64 {
        let (resp, _) = self.responsibilities(x);
        let mut first = 0.0;
        let mut second = 0.0;
        for (r, m, s) in resp {
            let g = (m - x) / s;
            first += r * g;
            second += r * (g * g - 1.0 / s);
        }
        second - first * first
    }

    /// Both scores at once.
    pub fn scores(&self, x: f64) -> (f64, f64) {
        let (resp, _) = self.responsibilities(x);
        let mut first = 0.0;
        let mut second = 0.0;
        for (r, m, s) in resp {
            let g = (m - x) / s;
            first += r * g;
            second += r * (g * g - 1.0 / s);
        }
        (first, second - first * first)
    }

    /// Closed-form posterior mean and variance: a responsibility-weighted
    /// mixture of conjugate per-component posteriors.
    pub fn mmse(&self, x: f64) -> PosteriorMoments {
        let (resp, _) = self.responsibilities(x);
        let s2 = self.sigma2;
        let mut mean = 0.0;
        let mut raw2 = 0.0;
        let parts: Vec<(f64, f64, f64)> = resp
            .iter()
            .zip(&self.base.variances)
            .map(|(&(r, m, s), &tau2)| {
                let m_hat = (tau2 * x + s2 * m) / s;
                let v_hat = tau2 * s2 / s;
                mean += r * m_hat;
                (r, m_hat, v_hat)
            })
            .collect();
        // Centered second moment avoids cancellation for large means.
        for (r, m_hat, v_hat) in parts {
            let d = m_hat - mean;
            raw2 += r * (v_hat + d * d);
        }
        PosteriorMoments { mean, var: raw2 }
    }

    /// Posterior moments by adaptive Gauss–Legendre integration of
    /// `p(x) N(x̃; x, σ²)`. Point-mass components are added as atoms.
    pub fn quadrature(&self, x: f64) -> Result<PosteriorMoments> {
        const ERROR_TARGET: f64 = 1e-8;
        let integ = AdaptiveIntegrator::default();
        let s2 = self.sigma2;
        let ln_norm = |t: f64, mean: f64, var: f64| {
            let d = t - mean;
            -0.5 * (2.0 * PI * var).ln() - d * d / (2.0 * var)
        };
        // Common scale so that the largest component contributes O(1).
        let scale = self
            .log_terms(x)
            .map(|t| t.0)
            .fold(f64::NEG_INFINITY, f64::max);

        let mut atoms = Vec::new();
        let mut continuous = Vec::new();
        for ((&w, &m), &tau2) in self
            .base
            .weights
            .iter()
            .zip(&self.base.means)
            .zip(&self.base.variances)
        {
            if tau2 == 0.0 {
                atoms.push(((w.ln() + ln_norm(x, m, s2) - scale).exp(), m));
            } else {
                let center = (tau2 * x + s2 * m) / (tau2 + s2);
                let half = 10.0 * (tau2 * s2 / (tau2 + s2)).sqrt();
                continuous.push((w.ln(), m, tau2, center - half, center + half));
            }
        }
        let density = |t: f64, lw: f64, m: f64, tau2: f64| {
            (lw + ln_norm(t, m, tau2) + ln_norm(x, t, s2) - scale).exp()
        };

        let mut z = atoms.iter().map(|a| a.0).sum::<f64>();
        let mut first = 0.0;
        for &(lw, m, tau2, lo, hi) in &continuous {
            let (v, _) = integ.integrate(
                |t| {
                    let p = density(t, lw, m, tau2);
                    [p, p * t]
                },
                lo,
                hi,
                ERROR_TARGET,
            )?;
            z += v[0];
            first += v[1];
        }
        let mean = atoms.iter().map(|(a, m)| (a / z) * m).sum::<f64>() + first / z;

        let mut central = atoms
            .iter()
            .map(|(a, m)| (a / z) * (m - mean) * (m - mean))
            .sum::<f64>();
        for &(lw, m, tau2, lo, hi) in &continuous {
            let (v, _) = integ.integrate(
                |t| {
                    let d = t - mean;
                    [density(t, lw, m, tau2) * d * d]
                },
                lo,
                hi,
                ERROR_TARGET,
            )?;
            central += v[0] / z;
        }
        Ok(PosteriorMoments { mean, var: central })
    }
}

/// Free-function form of [`GmmPrior::sample`].
pub fn sample(prior: &GmmPrior, n: usize, seed: u64) -> Vec<f64> {
    prior.sample(n, seed)
}
