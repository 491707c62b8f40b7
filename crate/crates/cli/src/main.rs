use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use stmp_core::harness::{
    self, fit, recover_to_dir, run_sweep, verify, write_sweep, ExperimentConfig, Tensor,
};
use stmp_core::stmp::se_predict;
use stmp_core::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "stmp", version, about = "Score-based turbo message passing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Recover one synthetic signal; exit 3 if the iteration cap is hit.
    Recover {
        #[command(flatten)]
        common: Common,
        /// Signal to measure instead of a prior draw (tensor file).
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Run the `[sweep]` grid and write aggregate and per-cell CSVs.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Fit affine and constant-trace score models; writes the model file.
    FitScore {
        #[command(flatten)]
        common: Common,
    },
    /// Write the state-evolution prediction for the configured problem.
    Se {
        #[command(flatten)]
        common: Common,
    },
    /// Run the built-in consistency checks.
    Verify,
}

fn load(common: &Common) -> anyhow::Result<(ExperimentConfig, u64)> {
    let cfg = ExperimentConfig::load(&common.config)?;
    let seed = common.seed.unwrap_or(cfg.seed);
    Ok((cfg, seed))
}

fn out_path(common: &Common, cfg: &ExperimentConfig) -> PathBuf {
    common.out.clone().unwrap_or_else(|| cfg.output_path.clone())
}

fn recover(common: &Common, truth: Option<&Path>) -> anyhow::Result<u8> {
    let (cfg, seed) = load(common)?;
    let truth = truth
        .map(|p| Tensor::read(p).with_context(|| format!("reading truth {}", p.display())))
        .transpose()?
        .map(|t| t.data);
    let out = out_path(common, &cfg);
    let art = recover_to_dir(&cfg, seed, truth, &out)?;
    let r = &art.recovery;
    println!(
        "iterations={} nfe={} converged={} nmse_db={:.4}",
        r.outcome.trace.iterations(),
        r.outcome.trace.nfe(),
        r.outcome.converged,
        r.nmse_db
    );
    if let Some(o) = r.oracle_nmse_db {
        println!("oracle_nmse_db={o:.4}");
    }
    if let Some(s) = r.se_nmse_db {
        println!("se_nmse_db={s:.4}");
    }
    println!("wrote {} and {}", art.estimate_path.display(), art.trace_path.display());
    Ok(if r.outcome.converged { 0 } else { EXIT_NOT_CONVERGED })
}

fn sweep(common: &Common, workers: Option<usize>) -> anyhow::Result<u8> {
    let (cfg, seed) = load(common)?;
    let report = run_sweep(&cfg, seed, workers)?;
    let out = out_path(common, &cfg);
    write_sweep(&report, seed, &out)?;
    let failed = report.cells.iter().filter(|c| c.result.is_err()).count();
    for r in &report.rows {
        println!(
            "ratio={} delta0={} median_nmse_db={} failed={}/{}",
            r.ratio,
            r.delta0,
            r.median_nmse_db.map_or("-".into(), |v| format!("{v:.3}")),
            r.failed,
            r.trials
        );
    }
    println!("{} cells, {failed} failed; wrote {}", report.cells.len(), out.display());
    Ok(0)
}

fn fit_score(common: &Common) -> anyhow::Result<u8> {
    let (cfg, seed) = load(common)?;
    let report = fit::fit_score(&cfg, seed)?;
    let out = out_path(common, &cfg);
    let path = if out.extension().is_some_and(|e| e == "toml") {
        out
    } else {
        std::fs::create_dir_all(&out)?;
        out.join("model.toml")
    };
    report.model.save(&path)?;
    print!("{}", fit::format_report(&report.rows));
    println!("wrote {}", path.display());
    Ok(0)
}

fn se(common: &Common) -> anyhow::Result<u8> {
    let (cfg, seed) = load(common)?;
    let spec = harness::recover::problem_spec(&cfg, cfg.m, cfg.delta0);
    let inst = harness::generate(&spec, seed, None)?;
    let points = se_predict(
        &inst.problem.gram_spectrum(),
        cfg.n,
        &cfg.prior,
        inst.problem.noise_var(),
        &cfg.stmp_config(),
    )?;
    let mut text = harness::recover::metadata_header(seed, &[]);
    text.push_str("iter,v_A_pri,v_A_post,v_A_ext,v_B_pri,mmse,v_B_ext,nmse_db\n");
    for p in &points {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            p.iter, p.v_a_pri, p.v_a_post, p.v_a_ext, p.v_b_pri, p.v_b_post, p.v_b_ext, p.nmse_db
        ));
    }
    let out = out_path(common, &cfg);
    std::fs::create_dir_all(&out)?;
    let path = out.join("se.csv");
    std::fs::write(&path, text)?;
    if let Some(p) = points.last() {
        println!("iterations={} fixed_point_nmse_db={:.4}", points.len(), p.nmse_db);
    }
    println!("wrote {}", path.display());
    Ok(0)
}

fn run_verify() -> u8 {
    let checks = verify::run_checks(verify::fault_from_env());
    for c in &checks {
        println!(
            "{} {:<28} tol={:e} measured={:e}{}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.tolerance,
            c.measured,
            c.detail.as_ref().map_or(String::new(), |d| format!(" ({d})"))
        );
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if failed.is_empty() {
        println!("all {} checks passed", checks.len());
        0
    } else {
        eprintln!("failed checks: {}", failed.join(", "));
        EXIT_FAILURE
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_)) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Recover { common, truth } => recover(common, truth.as_deref()),
        Command::Sweep { common, workers } => sweep(common, *workers),
        Command::FitScore { common } => fit_score(common),
        Command::Se { common } => se(common),
        Command::Verify => Ok(run_verify()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
