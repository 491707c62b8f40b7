//! Single-instance recovery and its on-disk artifacts.

use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::metrics::nmse_db;
use crate::rng::GENERATOR_ID;
use crate::stmp::{run_stmp, se_predict, StmpOutcome, StmpTrace};

use super::config::ExperimentConfig;
use super::denoiser::Denoiser;
use super::problem::{generate, ProblemSpec, SyntheticProblem};
use super::tensor_file::Tensor;

pub const TRACE_COLUMNS: [&str; 7] = [
    "iter", "nfe", "v_A_pri", "v_A_ext", "v_B_pri", "v_B_ext", "nmse_db",
];
pub const ESTIMATE_FILE: &str = "estimate.stmp";
pub const TRACE_FILE: &str = "trace.csv";
pub const NMSE_DEFINITION: &str = "10*log10(||x_hat - x||^2 / ||x||^2)";

/// Largest `n` for which the exact joint posterior is formed as a reference.
const ORACLE_MAX_N: usize = 2048;

#[derive(Debug)]
pub struct Recovery {
    pub instance: SyntheticProblem,
    pub outcome: StmpOutcome,
    /// Final NMSE against the generating signal.
    pub nmse_db: f64,
    /// NMSE of the exact joint-MMSE estimate (Gaussian priors, moderate `n`).
    pub oracle_nmse_db: Option<f64>,
    /// NMSE at the state-evolution fixed point.
    pub se_nmse_db: Option<f64>,
}

pub fn problem_spec(cfg: &ExperimentConfig, m: usize, delta0: f64) -> ProblemSpec {
    ProblemSpec {
        n: cfg.n,
        m,
        operator_kind: cfg.operator_kind,
        prior: cfg.prior.clone(),
        noise_std: cfg.noise_std(delta0),
    }
}

/// Generates the instance for `seed` and runs the loop; no I/O.
pub fn run_recovery(
    cfg: &ExperimentConfig,
    denoiser: &Denoiser,
    seed: u64,
    truth: Option<Vec<f64>>,
) -> Result<Recovery> {
    run_cell(cfg, denoiser, cfg.m, cfg.delta0, seed, truth, true)
}

pub(crate) fn run_cell(
    cfg: &ExperimentConfig,
    denoiser: &Denoiser,
    m: usize,
    delta0: f64,
    seed: u64,
    truth: Option<Vec<f64>>,
    references: bool,
) -> Result<Recovery> {
    let spec = problem_spec(cfg, m, delta0);
    let instance = generate(&spec, seed, truth)?;
    let stmp_cfg = cfg.stmp_config();
    let outcome = run_stmp(
        &instance.problem,
        denoiser.score.as_ref(),
        denoiser.trace.as_ref(),
        &stmp_cfg,
        Some(&instance.truth),
    )?;
    let nmse = nmse_db(&outcome.estimate, &instance.truth)?;
    let (mut oracle, mut se) = (None, None);
    if references {
        if cfg.prior.is_gaussian() && cfg.n <= ORACLE_MAX_N {
            let joint = instance.problem.exact_joint(
                &vec![cfg.prior.mean(); cfg.n],
                cfg.prior.variances()[0],
            )?;
            oracle = Some(nmse_db(&joint.mean, &instance.truth)?);
        }
        let points = se_predict(
            &instance.problem.gram_spectrum(),
            cfg.n,
            &cfg.prior,
            instance.problem.noise_var(),
            &stmp_cfg,
        )?;
        se = points.last().map(|p| p.nmse_db);
    }
    Ok(Recovery {
        instance,
        outcome,
        nmse_db: nmse,
        oracle_nmse_db: oracle,
        se_nmse_db: se,
    })
}

/// `#`-prefixed metadata lines shared by every CSV artifact.
pub fn metadata_header(seed: u64, extra: &[(&str, String)]) -> String {
    let mut s = format!(
        "# generator={GENERATOR_ID}\n# seed={seed}\n# version={}\n",
        env!("CARGO_PKG_VERSION")
    );
    for (k, v) in extra {
        s.push_str(&format!("# {k}={v}\n"));
    }
    s
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

/// Trace CSV body (no metadata).
pub fn trace_csv(trace: &StmpTrace) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRACE_COLUMNS).map_err(csv_err)?;
    for r in &trace.records {
        w.write_record([
            r.iter.to_string(),
            r.nfe.to_string(),
            r.v_a_pri.to_string(),
            r.v_a_ext.to_string(),
            r.v_b_pri.to_string(),
            r.v_b_ext.to_string(),
            r.nmse_db.map_or_else(String::new, |v| v.to_string()),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| csv_err(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub(crate) fn csv_err(e: csv::Error) -> crate::error::Error {
    crate::error::Error::Io(std::io::Error::other(e))
}

#[derive(Debug)]
pub struct RecoverArtifacts {
    pub recovery: Recovery,
    pub estimate_path: PathBuf,
    pub trace_path: PathBuf,
}

/// Runs one recovery and writes `estimate.stmp` and `trace.csv` into `out_dir`.
pub fn recover_to_dir(
    cfg: &ExperimentConfig,
    seed: u64,
    truth: Option<Vec<f64>>,
    out_dir: &Path,
) -> Result<RecoverArtifacts> {
    let denoiser = Denoiser::from_config(cfg)?;
    let recovery = run_recovery(cfg, &denoiser, seed, truth)?;
    std::fs::create_dir_all(out_dir)?;
    let estimate_path = out_dir.join(ESTIMATE_FILE);
    Tensor::vector(recovery.outcome.estimate.clone()).write(&estimate_path)?;

    let header = metadata_header(
        seed,
        &[
            ("nmse", NMSE_DEFINITION.to_string()),
            ("converged", recovery.outcome.converged.to_string()),
            ("final_nmse_db", recovery.nmse_db.to_string()),
            ("oracle_nmse_db", fmt_opt(recovery.oracle_nmse_db)),
            ("se_nmse_db", fmt_opt(recovery.se_nmse_db)),
        ],
    );
    let trace_path = out_dir.join(TRACE_FILE);
    std::fs::write(&trace_path, header + &trace_csv(&recovery.outcome.trace)?)?;
    Ok(RecoverArtifacts {
        recovery,
        estimate_path,
        trace_path,
    })
}
