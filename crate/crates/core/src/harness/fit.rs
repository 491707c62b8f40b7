//! Fitting the affine / constant-trace score models from prior samples.

use crate::error::Result;
use crate::score::{
    dsm_loss1_estimate, dsm_loss2_estimate, fit_affine_score, fit_constant_trace,
    AnalyticGmmScore, AnalyticGmmTrace, DsmDataset, LossEstimate, SigmaGrid, ZeroScore,
};

use super::config::ExperimentConfig;
use super::denoiser::FittedModel;

/// Losses at one noise level for the fitted, analytic and zero models.
#[derive(Debug, Clone, PartialEq)]
pub struct FitRow {
    pub sigma: f64,
    pub slope: f64,
    pub intercept: f64,
    pub trace: f64,
    pub loss1_fitted: LossEstimate,
    pub loss1_analytic: LossEstimate,
    pub loss1_zero: LossEstimate,
    pub loss2_fitted: LossEstimate,
    pub loss2_analytic: LossEstimate,
    pub loss2_zero: LossEstimate,
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: FittedModel,
    pub rows: Vec<FitRow>,
}

pub fn sigma_grid(cfg: &ExperimentConfig) -> Result<SigmaGrid> {
    match &cfg.fit.sigmas {
        Some(s) => SigmaGrid::new(s.clone()),
        None => SigmaGrid::default_for_rms(cfg.prior.second_moment().sqrt().max(1e-12)),
    }
}

pub fn fit_dataset(cfg: &ExperimentConfig, seed: u64) -> Result<DsmDataset> {
    DsmDataset::from_prior(&cfg.prior, cfg.fit.samples, cfg.fit.dim, sigma_grid(cfg)?, seed)
}

/// Per-level losses of `model` next to the analytic and zero models on `data`.
pub fn evaluate(model: &FittedModel, cfg: &ExperimentConfig, data: &DsmDataset) -> Result<Vec<FitRow>> {
    let analytic = AnalyticGmmScore::new(cfg.prior.clone());
    let analytic_trace = AnalyticGmmTrace::new(cfg.prior.clone());
    data.sigma_grid()
        .values()
        .iter()
        .map(|&sigma| {
            let (slope, intercept) = model.affine.coefficients(sigma);
            Ok(FitRow {
                sigma,
                slope,
                intercept,
                trace: model.trace.value(sigma),
                loss1_fitted: dsm_loss1_estimate(&model.affine, data, sigma)?,
                loss1_analytic: dsm_loss1_estimate(&analytic, data, sigma)?,
                loss1_zero: dsm_loss1_estimate(&ZeroScore, data, sigma)?,
                loss2_fitted: dsm_loss2_estimate(&model.trace, &model.affine, data, sigma)?,
                loss2_analytic: dsm_loss2_estimate(&analytic_trace, &analytic, data, sigma)?,
                loss2_zero: dsm_loss2_estimate(&ZeroScore, &ZeroScore, data, sigma)?,
            })
        })
        .collect()
}

/// Samples the prior, fits both models on every grid level and reports
/// the training losses.
pub fn fit_score(cfg: &ExperimentConfig, seed: u64) -> Result<FitReport> {
    let data = fit_dataset(cfg, seed)?;
    let affine = fit_affine_score(&data)?;
    let trace = fit_constant_trace(&data, &affine)?;
    let model = FittedModel { affine, trace };
    let rows = evaluate(&model, cfg, &data)?;
    Ok(FitReport { model, rows })
}

/// Fixed-width table of a report.
pub fn format_report(rows: &[FitRow]) -> String {
    let mut s = format!(
        "{:>10} {:>10} {:>10} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}\n",
        "sigma", "slope", "intercept", "l1_fitted", "l1_analytic", "l1_zero", "l2_fitted",
        "l2_analytic", "l2_zero"
    );
    for r in rows {
        s.push_str(&format!(
            "{:>10.4e} {:>10.5} {:>10.5} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e}\n",
            r.sigma,
            r.slope,
            r.intercept,
            r.loss1_fitted.value,
            r.loss1_analytic.value,
            r.loss1_zero.value,
            r.loss2_fitted.value,
            r.loss2_analytic.value,
            r.loss2_zero.value,
        ));
    }
    s
}
