//! The turbo loop: LMMSE module, extrinsic hand-off, score-based denoiser,
//! extrinsic hand-off back, repeated until the denoiser output settles.

mod se;

use serde::{Deserialize, Serialize};

pub use se::{mmse_channel, mmse_channel_hermite, se_predict, SePoint};

use crate::error::{check_len, Error, Result};
use crate::lmmse::LmmseProblem;
use crate::messages::{damp, extrinsic, DampingPolicy, Extrinsic, GaussianMessage};
use crate::metrics::{nmse_db, norm};
use crate::priors::GmmPrior;
use crate::score::{tweedie_denoise, ScoreModel, TraceScoreModel};

/// Score-network evaluations charged per iteration (first- and second-order).
pub const NFE_PER_ITERATION: usize = 2;

/// Relative clamp applied to `v_post` on the single allowed retry after a
/// no-information-gain event.
const RETRY_SHRINK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopRule {
    /// `‖Δx‖ / max(‖x‖, 1e−12) < tol`
    #[default]
    Relative,
    /// `‖Δx‖ < tol`
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StmpConfig {
    pub max_iters: usize,
    /// Stop once the change of `x_B^post` drops strictly below this; `0`
    /// disables early stopping.
    pub tol: f64,
    pub beta: DampingPolicy,
    /// Initial `x_A^pri`; zeros when absent.
    pub init_mean: Option<Vec<f64>>,
    /// Initial `v_A^pri`; 1.0 when absent (see [`StmpConfig::with_prior_defaults`]).
    pub init_var: Option<f64>,
    /// Feed the damped (rather than raw) extrinsic message into the next
    /// iteration's damping step.
    pub damp_from_damped: bool,
    pub stop_rule: StopRule,
}

impl Default for StmpConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tol: 1e-4,
            beta: DampingPolicy::undamped(),
            init_mean: None,
            init_var: None,
            damp_from_damped: true,
            stop_rule: StopRule::Relative,
        }
    }
}

impl StmpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tol must be nonnegative, got {}",
                self.tol
            )));
        }
        if let Some(v) = self.init_var {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "init_var must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Fills an unset `init_var` with the prior second moment.
    pub fn with_prior_defaults(mut self, prior: &GmmPrior) -> Self {
        if self.init_var.is_none() {
            let m2 = prior.second_moment();
            self.init_var = Some(if m2 > 0.0 { m2 } else { 1.0 });
        }
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        self.beta = DampingPolicy::new(beta)?;
        Ok(self)
    }

    pub(crate) fn initial_var(&self) -> f64 {
        self.init_var.unwrap_or(1.0)
    }
}

/// Numerical safeguards that fired during one iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClampCounts {
    pub extrinsic: usize,
    pub trace: usize,
    pub variance: usize,
    pub retries: usize,
}

impl ClampCounts {
    pub fn total(&self) -> usize {
        self.extrinsic + self.trace + self.variance + self.retries
    }

    fn add(&mut self, other: &ClampCounts) {
        self.extrinsic += other.extrinsic;
        self.trace += other.trace;
        self.variance += other.variance;
        self.retries += other.retries;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based.
    pub iter: usize,
    pub v_a_pri: f64,
    pub v_a_post: f64,
    pub v_a_ext: f64,
    pub v_b_pri: f64,
    pub v_b_post: f64,
    pub v_b_ext: f64,
    /// Against the reference signal, when one was supplied.
    pub nmse_db: Option<f64>,
    /// Change of `x_B^post` under the configured stop rule (`None` on the first iteration).
    pub change: Option<f64>,
    pub clamps: ClampCounts,
    /// Cumulative evaluations after this iteration.
    pub nfe: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StmpTrace {
    pub records: Vec<IterationRecord>,
}

impl StmpTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn nfe(&self) -> usize {
        NFE_PER_ITERATION * self.records.len()
    }

    pub fn clamps(&self) -> ClampCounts {
        let mut c = ClampCounts::default();
        for r in &self.records {
            c.add(&r.clamps);
        }
        c
    }

    pub fn final_nmse_db(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.nmse_db)
    }
}

#[derive(Debug, Clone)]
pub struct StmpOutcome {
    /// Final `x_B^post`.
    pub estimate: Vec<f64>,
    pub trace: StmpTrace,
    /// Stopped on the tolerance rather than the iteration cap.
    pub converged: bool,
}

/// Extrinsic with the single-retry policy: a no-information-gain event is
/// retried once with `v_post = (1 − 1e−6) v_pri`; a second event in the
/// immediately following iteration of the same module is an error.
fn guarded_extrinsic(
    post: &GaussianMessage,
    pri: &GaussianMessage,
    stalled: &mut bool,
    clamps: &mut ClampCounts,
) -> Result<GaussianMessage> {
    let out = match extrinsic(post, pri) {
        Ok(e) => {
            *stalled = false;
            e
        }
        Err(Error::NoInformationGain { .. }) if !*stalled => {
            *stalled = true;
            clamps.retries += 1;
            let shrunk = GaussianMessage {
                mean: post.mean.clone(),
                variance: (1.0 - RETRY_SHRINK) * pri.variance,
            };
            extrinsic(&shrunk, pri)?
        }
        Err(e) => return Err(e),
    };
    let Extrinsic { message, clamped } = out;
    if clamped {
        clamps.extrinsic += 1;
    }
    Ok(message)
}

fn finite_or(context: impl FnOnce() -> String, msg: &GaussianMessage) -> Result<()> {
    if msg.variance.is_finite() && msg.mean.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { context: context() })
    }
}

/// Runs the loop until the tolerance or the iteration cap is hit.
pub fn run_stmp(
    problem: &LmmseProblem,
    score: &dyn ScoreModel,
    trace_model: &dyn TraceScoreModel,
    config: &StmpConfig,
    truth: Option<&[f64]>,
) -> Result<StmpOutcome> {
    config.validate()?;
    let n = problem.cols();
    if let Some(t) = truth {
        check_len("stmp: reference signal length", n, t.len())?;
    }
    let init_mean = match &config.init_mean {
        Some(m) => {
            check_len("stmp: init_mean length", n, m.len())?;
            m.clone()
        }
        None => vec![0.0; n],
    };
    let mut pri_a = GaussianMessage::new(init_mean, config.initial_var())?;
    let beta = config.beta;

    let mut old_ext_a: Option<GaussianMessage> = None;
    let mut old_ext_b: Option<GaussianMessage> = None;
    let mut stalled_a = false;
    let mut stalled_b = false;
    let mut previous: Option<Vec<f64>> = None;
    let mut trace = StmpTrace::default();
    let mut converged = false;

    for iter in 1..=config.max_iters {
        let mut clamps = ClampCounts::default();

        let post_a = problem.posterior(&pri_a)?;
        finite_or(|| format!("iteration {iter}: LMMSE posterior"), &post_a)?;
        let ext_a = guarded_extrinsic(&post_a, &pri_a, &mut stalled_a, &mut clamps)?;
        let pri_b = match &old_ext_a {
            Some(old) => damp(&ext_a, old, beta)?,
            None => ext_a.clone(),
        };
        old_ext_a = Some(if config.damp_from_damped { pri_b.clone() } else { ext_a.clone() });

        let denoised = tweedie_denoise(score, trace_model, &pri_b)?;
        clamps.trace += usize::from(denoised.trace_clamped);
        clamps.variance += usize::from(denoised.variance_clamped);
        let post_b = denoised.message;
        finite_or(|| format!("iteration {iter}: denoiser posterior"), &post_b)?;
        let ext_b = guarded_extrinsic(&post_b, &pri_b, &mut stalled_b, &mut clamps)?;
        let next_pri_a = match &old_ext_b {
            Some(old) => damp(&ext_b, old, beta)?,
            None => ext_b.clone(),
        };
        old_ext_b = Some(if config.damp_from_damped {
            next_pri_a.clone()
        } else {
            ext_b.clone()
        });

        let change = previous.as_ref().map(|prev| {
            let delta: f64 = prev
                .iter()
                .zip(&post_b.mean)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            match config.stop_rule {
                StopRule::Relative => delta / norm(&post_b.mean).max(1e-12),
                StopRule::Absolute => delta,
            }
        });
        let nmse = truth.map(|t| nmse_db(&post_b.mean, t)).transpose()?;
        trace.records.push(IterationRecord {
            iter,
            v_a_pri: pri_a.variance,
            v_a_post: post_a.variance,
            v_a_ext: ext_a.variance,
            v_b_pri: pri_b.variance,
            v_b_post: post_b.variance,
            v_b_ext: ext_b.variance,
            nmse_db: nmse,
            change,
            clamps,
            nfe: NFE_PER_ITERATION * iter,
        });

        pri_a = next_pri_a;
        previous = Some(post_b.mean);
        if change.is_some_and(|c| c < config.tol) {
            converged = true;
            break;
        }
    }

    Ok(StmpOutcome {
        estimate: previous.expect("at least one iteration"),
        trace,
        converged,
    })
}
