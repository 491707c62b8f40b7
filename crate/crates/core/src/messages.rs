//! Isotropic Gaussian messages exchanged between the linear and denoising
//! modules, with the extrinsic (division) rule and damping.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

pub const MIN_VARIANCE: f64 = 1e-9;
pub const MAX_VARIANCE: f64 = 1e9;

/// `N(x; mean, variance · I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMessage {
    pub mean: Vec<f64>,
    pub variance: f64,
}

impl GaussianMessage {
    pub fn new(mean: Vec<f64>, variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "message variance must be positive and finite, got {variance}"
            )));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "message mean".into(),
            });
        }
        Ok(Self { mean, variance })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Result of [`extrinsic`]; `clamped` is set when the variance left
/// `[MIN_VARIANCE, MAX_VARIANCE]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Extrinsic {
    pub message: GaussianMessage,
    pub clamped: bool,
}

/// Divides the prior out of the posterior:
/// `1/v_ext = 1/v_post − 1/v_pri`, `x_ext = v_ext (x_post/v_post − x_pri/v_pri)`.
///
/// The mean uses the unclamped extrinsic variance; only the reported
/// variance is clamped.
pub fn extrinsic(post: &GaussianMessage, pri: &GaussianMessage) -> Result<Extrinsic> {
    check_len("extrinsic: message dimensions", pri.dim(), post.dim())?;
    if !(post.variance < pri.variance) {
        return Err(Error::NoInformationGain {
            post_var: post.variance,
            pri_var: pri.variance,
        });
    }
    let precision = 1.0 / post.variance - 1.0 / pri.variance;
    let v_ext = 1.0 / precision;
    let mean = post
        .mean
        .iter()
        .zip(&pri.mean)
        .map(|(xp, xq)| v_ext * (xp / post.variance - xq / pri.variance))
        .collect();
    let clamped_var = v_ext.clamp(MIN_VARIANCE, MAX_VARIANCE);
    Ok(Extrinsic {
        message: GaussianMessage {
            mean,
            variance: clamped_var,
        },
        clamped: clamped_var != v_ext,
    })
}

/// Damping factor `β ∈ (0, 1]`; serialized as the bare number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct DampingPolicy {
    beta: f64,
}

impl DampingPolicy {
    pub fn new(beta: f64) -> Result<Self> {
        if beta > 0.0 && beta <= 1.0 {
            Ok(Self { beta })
        } else {
            Err(Error::InvalidArgument(format!(
                "damping factor must lie in (0, 1], got {beta}"
            )))
        }
    }

    pub fn undamped() -> Self {
        Self { beta: 1.0 }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl TryFrom<f64> for DampingPolicy {
    type Error = Error;

    fn try_from(beta: f64) -> Result<Self> {
        Self::new(beta)
    }
}

impl From<DampingPolicy> for f64 {
    fn from(p: DampingPolicy) -> f64 {
        p.beta
    }
}

impl Default for DampingPolicy {
    fn default() -> Self {
        Self::undamped()
    }
}

/// Convex combination `β·new + (1−β)·old` of means and variances.
pub fn damp(
    new: &GaussianMessage,
    old: &GaussianMessage,
    policy: DampingPolicy,
) -> Result<GaussianMessage> {
    check_len("damp: message dimensions", new.dim(), old.dim())?;
    let beta = policy.beta;
    if beta == 1.0 {
        return Ok(new.clone());
    }
    let mean = new
        .mean
        .iter()
        .zip(&old.mean)
        .map(|(a, b)| beta * a + (1.0 - beta) * b)
        .collect();
    let variance = beta * new.variance + (1.0 - beta) * old.variance;
    Ok(GaussianMessage { mean, variance })
}
