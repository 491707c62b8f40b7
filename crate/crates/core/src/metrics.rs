//! Reconstruction quality metrics.

use crate::error::{check_len, Error, Result};

/// Lower bound reported for NMSE, upper bound for PSNR.
pub const DB_LIMIT: f64 = 300.0;

/// `10 log10(‖x̂ − x‖² / ‖x‖²)`, floored at −300 dB.
pub fn nmse_db(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    check_len("nmse: estimate vs truth", truth.len(), estimate.len())?;
    let energy: f64 = truth.iter().map(|x| x * x).sum();
    if !(energy > 0.0) {
        return Err(Error::InvalidArgument(
            "NMSE undefined for an all-zero reference".into(),
        ));
    }
    let err = squared_error(estimate, truth);
    Ok((10.0 * (err / energy).log10()).max(-DB_LIMIT))
}

/// `10 log10(peak² N / ‖x̂ − x‖²)`, capped at +300 dB. `peak` defaults to
/// `max |x|`.
pub fn psnr_db(estimate: &[f64], truth: &[f64], peak: Option<f64>) -> Result<f64> {
    check_len("psnr: estimate vs truth", truth.len(), estimate.len())?;
    let peak = peak.unwrap_or_else(|| truth.iter().fold(0.0, |m: f64, x| m.max(x.abs())));
    let err = squared_error(estimate, truth);
    let value = 10.0 * (peak * peak * truth.len() as f64 / err).log10();
    Ok(if value.is_nan() { DB_LIMIT } else { value.min(DB_LIMIT) })
}

/// NMSE and PSNR together.
pub fn metrics(estimate: &[f64], truth: &[f64]) -> Result<(f64, f64)> {
    Ok((nmse_db(estimate, truth)?, psnr_db(estimate, truth, None)?))
}

fn squared_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
