use stmp_core::harness::{fit, ExperimentConfig, FittedModel};
use stmp_core::priors::GmmPrior;
use stmp_core::score::{
    dsm_loss1_estimate, dsm_loss2_estimate, dsm_unified, fit_affine_score, fit_constant_trace,
    AnalyticGmmScore, AnalyticGmmTrace, DsmDataset, DsmObjective, SigmaGrid, Weighting, ZeroScore,
};
use stmp_core::stmp::mmse_channel;

fn dataset(prior: &GmmPrior, rows: usize, dim: usize, sigmas: &[f64], seed: u64) -> DsmDataset {
    DsmDataset::from_prior(prior, rows, dim, SigmaGrid::new(sigmas.to_vec()).unwrap(), seed).unwrap()
}

#[test]
fn oracle_first_order_loss_matches_population_floor() {
    let priors = [
        GmmPrior::gaussian(0.0, 1.0).unwrap(),
        GmmPrior::bernoulli_gaussian(0.1, 1.0).unwrap(),
        GmmPrior::new(vec![0.4, 0.6], vec![-1.5, 2.0], vec![0.3, 0.0]).unwrap(),
    ];
    let dim = 4;
    for prior in &priors {
        for sigma in [0.3, 1.0] {
            let data = dataset(prior, 20_000, dim, &[sigma], 5);
            let est = dsm_loss1_estimate(&AnalyticGmmScore::new(prior.clone()), &data, sigma).unwrap();
            let s2 = sigma * sigma;
            let floor = dim as f64 * mmse_channel(prior, s2).unwrap() / (s2 * s2);
            assert!(
                (est.value - floor).abs() <= 3.0 * est.std_err,
                "{prior:?} σ={sigma}: {} vs {floor} (se {})",
                est.value,
                est.std_err
            );
        }
    }
}

#[test]
fn gaussian_oracle_loss_is_half_dimension() {
    let data = dataset(&GmmPrior::gaussian(0.0, 1.0).unwrap(), 40_000, 3, &[1.0], 6);
    let est = dsm_loss1_estimate(&AnalyticGmmScore::new(GmmPrior::gaussian(0.0, 1.0).unwrap()), &data, 1.0).unwrap();
    assert!((est.value - 1.5).abs() <= 3.0 * est.std_err);
}

#[test]
fn zero_model_loss_is_dimension_over_variance() {
    let prior = GmmPrior::bernoulli_gaussian(0.2, 2.0).unwrap();
    let dim = 5;
    for sigma in [0.5, 2.0] {
        let data = dataset(&prior, 20_000, dim, &[sigma], 7);
        let est = dsm_loss1_estimate(&ZeroScore, &data, sigma).unwrap();
        let want = dim as f64 / (sigma * sigma);
        assert!((est.value - want).abs() <= 3.0 * est.std_err);
    }
}

#[test]
fn fitted_models_do_not_beat_the_oracle() {
    let prior = GmmPrior::bernoulli_gaussian(0.1, 1.0).unwrap();
    let sigmas = [0.05, 0.2, 1.0];
    let data = dataset(&prior, 20_000, 2, &sigmas, 8);
    let affine = fit_affine_score(&data).unwrap();
    let oracle = AnalyticGmmScore::new(prior.clone());
    for sigma in sigmas {
        let fitted = dsm_loss1_estimate(&affine, &data, sigma).unwrap();
        let best = dsm_loss1_estimate(&oracle, &data, sigma).unwrap();
        assert!(fitted.value >= best.value - 3.0 * best.std_err, "σ={sigma}");
        let zero = dsm_loss1_estimate(&ZeroScore, &data, sigma).unwrap();
        assert!(fitted.value <= zero.value);
    }
}

#[test]
fn oracle_trace_loss_on_standard_normal() {
    // b̂ = (w − x)/2, so ‖b̂‖² = χ²_N / 2 and the residual is −(χ²_N − N)/2:
    // population loss N/2.
    let prior = GmmPrior::gaussian(0.0, 1.0).unwrap();
    let dim = 6;
    let data = dataset(&prior, 50_000, dim, &[1.0], 9);
    let est = dsm_loss2_estimate(
        &AnalyticGmmTrace::new(prior.clone()),
        &AnalyticGmmScore::new(prior),
        &data,
        1.0,
    )
    .unwrap();
    assert!((est.value - dim as f64 / 2.0).abs() <= 3.0 * est.std_err, "{est:?}");
}

#[test]
fn affine_fit_recovers_gaussian_score() {
    let data = dataset(&GmmPrior::gaussian(0.0, 1.0).unwrap(), 100_000, 1, &[1.0], 10);
    let (a, b) = fit_affine_score(&data).unwrap().coefficients(1.0);
    assert!((a + 0.5).abs() <= 0.01, "{a}");
    assert!(b.abs() <= 0.01, "{b}");

    // N(3, 1) at σ = 1: score −(x̃ − 3)/2.
    let data = dataset(&GmmPrior::gaussian(3.0, 1.0).unwrap(), 100_000, 1, &[1.0], 11);
    let (a, b) = fit_affine_score(&data).unwrap().coefficients(1.0);
    assert!((a + 0.5).abs() <= 0.01, "{a}");
    assert!((b - 1.5).abs() <= 0.05, "{b}");
}

#[test]
fn constant_trace_fit_recovers_half_dimension() {
    let dim = 8;
    let data = dataset(&GmmPrior::gaussian(0.0, 1.0).unwrap(), 100_000, dim, &[1.0], 12);
    let affine = fit_affine_score(&data).unwrap();
    let trace = fit_constant_trace(&data, &affine).unwrap();
    let want = -(dim as f64) / 2.0;
    assert!((trace.value(1.0) - want).abs() <= 0.02 * dim as f64, "{}", trace.value(1.0));
}

#[test]
fn duplicating_data_leaves_loss_unchanged() {
    let prior = GmmPrior::bernoulli_gaussian(0.3, 1.0).unwrap();
    let data = dataset(&prior, 10_000, 2, &[0.5], 13);
    let model = AnalyticGmmScore::new(prior);
    let once = dsm_loss1_estimate(&model, &data, 0.5).unwrap();
    let twice = dsm_loss1_estimate(&model, &data.repeated(2), 0.5).unwrap();
    assert!((once.value - twice.value).abs() <= 3.0 * once.std_err);
}

#[test]
fn unified_objective_weights_levels() {
    let prior = GmmPrior::gaussian(0.0, 1.0).unwrap();
    let sigmas = [0.5, 1.0, 2.0];
    let data = dataset(&prior, 2000, 1, &sigmas, 14);
    let model = AnalyticGmmScore::new(prior);
    let got = dsm_unified(DsmObjective::First(&model), &data, &Weighting::first_order_default()).unwrap();
    let mut want = 0.0;
    for s in sigmas {
        want += s * s * dsm_loss1_estimate(&model, &data, s).unwrap().value;
    }
    assert!((got - want / 3.0).abs() < 1e-12 * want);
    let table = Weighting::Table(vec![(0.5, 1.0), (1.0, 1.0)]);
    assert!(dsm_unified(DsmObjective::First(&model), &data, &table).is_err());
}

fn fit_config(sigmas: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(&format!(
        r#"
n = 16
m = 8
operator_kind = "dense-gaussian"
delta0 = 0.1
output_path = "out"

[prior]
weights = [1.0]
means = [0.0]
variances = [1.0]

[fit]
samples = 100000
sigmas = {sigmas}
"#
    ))
    .unwrap()
}

#[test]
fn fit_report_and_model_file_round_trip() {
    let cfg = fit_config("[0.1, 0.5, 1.0, 2.0]");
    let report = fit::fit_score(&cfg, 3).unwrap();
    let at_one = report.rows.iter().find(|r| r.sigma == 1.0).unwrap();
    assert!((at_one.slope + 0.5).abs() <= 0.01);
    for r in &report.rows {
        assert!(r.loss1_fitted.value <= r.loss1_zero.value, "σ={}", r.sigma);
    }
    let text = report.model.to_toml_string().unwrap();
    let back = FittedModel::from_toml_str(&text).unwrap();
    assert_eq!(back, report.model);
    let data = fit::fit_dataset(&cfg, 3).unwrap();
    let again = fit::evaluate(&back, &cfg, &data).unwrap();
    for (a, b) in again.iter().zip(&report.rows) {
        assert!((a.loss1_fitted.value - b.loss1_fitted.value).abs() <= 1e-12 * b.loss1_fitted.value);
        assert!((a.loss2_fitted.value - b.loss2_fitted.value).abs() <= 1e-12 * b.loss2_fitted.value.max(1.0));
    }
}
