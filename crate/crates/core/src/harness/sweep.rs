//! Monte-Carlo grid over compression ratio and noise level.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::hash_words;

use super::config::ExperimentConfig;
use super::denoiser::Denoiser;
use super::recover::{csv_err, metadata_header, run_cell};

pub const SWEEP_COLUMNS: [&str; 11] = [
    "ratio",
    "delta0",
    "m",
    "trials",
    "failed",
    "converged",
    "mean_nmse_db",
    "median_nmse_db",
    "mean_iters",
    "mean_nfe",
    "clamps",
];
pub const CELL_COLUMNS: [&str; 9] = [
    "ratio", "delta0", "m", "trial", "seed", "status", "nmse_db", "iters", "clamps",
];
pub const SWEEP_FILE: &str = "sweep.csv";
pub const CELLS_FILE: &str = "cells.csv";

/// Seed of one trial: a pure function of the config seed and the cell
/// coordinates, so results do not depend on scheduling.
pub fn cell_seed(seed: u64, ratio: f64, delta0: f64, trial: usize) -> u64 {
    seed ^ hash_words(&[ratio.to_bits(), delta0.to_bits(), trial as u64])
}

/// Number of measurements for a ratio, at least one.
pub fn rows_for_ratio(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64).round() as usize).clamp(1, n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub nmse_db: f64,
    pub iterations: usize,
    pub converged: bool,
    pub clamps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub ratio: f64,
    pub delta0: f64,
    pub m: usize,
    pub trial: usize,
    pub seed: u64,
    /// Error message on failure.
    pub result: std::result::Result<CellSummary, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub ratio: f64,
    pub delta0: f64,
    pub m: usize,
    pub trials: usize,
    pub failed: usize,
    pub converged: usize,
    pub mean_nmse_db: Option<f64>,
    pub median_nmse_db: Option<f64>,
    pub mean_iters: Option<f64>,
    pub clamps: usize,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub cells: Vec<CellResult>,
    pub rows: Vec<SweepRow>,
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let k = values.len();
    Some(if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    })
}

/// Runs every `(ratio, delta0, trial)` cell on `workers` threads (all cores
/// when `None`). A failing cell is recorded and does not stop the sweep.
pub fn run_sweep(cfg: &ExperimentConfig, seed: u64, workers: Option<usize>) -> Result<SweepReport> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("missing `[sweep]` section".into()))?;
    let denoiser = Denoiser::from_config(cfg)?;
    let mut jobs = Vec::new();
    for &ratio in &sweep.ratios {
        for &delta0 in &sweep.delta0s {
            for trial in 0..cfg.trials {
                jobs.push((ratio, delta0, trial));
            }
        }
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers.or(sweep.workers) {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let cells: Vec<CellResult> = pool.install(|| {
        jobs.par_iter()
            .map(|&(ratio, delta0, trial)| {
                let m = rows_for_ratio(cfg.n, ratio);
                let s = cell_seed(seed, ratio, delta0, trial);
                let result = run_cell(cfg, &denoiser, m, delta0, s, None, false)
                    .map(|r| CellSummary {
                        nmse_db: r.nmse_db,
                        iterations: r.outcome.trace.iterations(),
                        converged: r.outcome.converged,
                        clamps: r.outcome.trace.clamps().total(),
                    })
                    .map_err(|e| e.to_string());
                CellResult {
                    ratio,
                    delta0,
                    m,
                    trial,
                    seed: s,
                    result,
                }
            })
            .collect()
    });

    let rows = cells
        .chunks(cfg.trials)
        .map(|group| {
            let ok: Vec<&CellSummary> = group.iter().filter_map(|c| c.result.as_ref().ok()).collect();
            let mut nmse: Vec<f64> = ok.iter().map(|c| c.nmse_db).collect();
            let count = ok.len() as f64;
            SweepRow {
                ratio: group[0].ratio,
                delta0: group[0].delta0,
                m: group[0].m,
                trials: group.len(),
                failed: group.len() - ok.len(),
                converged: ok.iter().filter(|c| c.converged).count(),
                mean_nmse_db: (!ok.is_empty()).then(|| nmse.iter().sum::<f64>() / count),
                median_nmse_db: median(&mut nmse),
                mean_iters: (!ok.is_empty())
                    .then(|| ok.iter().map(|c| c.iterations as f64).sum::<f64>() / count),
                clamps: ok.iter().map(|c| c.clamps).sum(),
            }
        })
        .collect();
    Ok(SweepReport { cells, rows })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Aggregate CSV body (no metadata).
pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_COLUMNS).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.ratio.to_string(),
            r.delta0.to_string(),
            r.m.to_string(),
            r.trials.to_string(),
            r.failed.to_string(),
            r.converged.to_string(),
            opt(r.mean_nmse_db),
            opt(r.median_nmse_db),
            opt(r.mean_iters),
            opt(r.mean_iters.map(|i| i * crate::stmp::NFE_PER_ITERATION as f64)),
            r.clamps.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// Per-cell CSV body (no metadata); failures carry the error message.
pub fn cells_csv(cells: &[CellResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CELL_COLUMNS).map_err(csv_err)?;
    for c in cells {
        let (status, nmse, iters, clamps) = match &c.result {
            Ok(s) => (
                if s.converged { "converged" } else { "max-iters" }.to_string(),
                s.nmse_db.to_string(),
                s.iterations.to_string(),
                s.clamps.to_string(),
            ),
            Err(e) => (format!("error: {e}"), String::new(), String::new(), String::new()),
        };
        w.write_record([
            c.ratio.to_string(),
            c.delta0.to_string(),
            c.m.to_string(),
            c.trial.to_string(),
            c.seed.to_string(),
            status,
            nmse,
            iters,
            clamps,
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| csv_err(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes `sweep.csv` and `cells.csv`. The `generated_unix` metadata line
/// is the only content that varies between identical runs.
pub fn write_sweep(report: &SweepReport, seed: u64, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let header = metadata_header(
        seed,
        &[
            ("nmse", super::recover::NMSE_DEFINITION.to_string()),
            ("generated_unix", stamp.to_string()),
        ],
    );
    std::fs::write(out_dir.join(SWEEP_FILE), header.clone() + &sweep_csv(&report.rows)?)?;
    std::fs::write(out_dir.join(CELLS_FILE), header + &cells_csv(&report.cells)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_seeds_differ_by_coordinate() {
        let a = cell_seed(1, 0.5, 0.1, 0);
        assert_ne!(a, cell_seed(1, 0.5, 0.1, 1));
        assert_ne!(a, cell_seed(1, 0.25, 0.1, 0));
        assert_ne!(a, cell_seed(1, 0.5, 0.2, 0));
        assert_eq!(a, cell_seed(1, 0.5, 0.1, 0));
    }

    #[test]
    fn median_handles_even_and_empty() {
        assert_eq!(median(&mut []), None);
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }

    #[test]
    fn ratios_map_to_rows() {
        assert_eq!(rows_for_ratio(100, 0.5), 50);
        assert_eq!(rows_for_ratio(100, 0.001), 1);
        assert_eq!(rows_for_ratio(100, 1.0), 100);
    }
}
