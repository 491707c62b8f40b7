//! Scalar state-evolution recursion for the turbo loop.

use crate::error::{Error, Result};
use crate::messages::{MAX_VARIANCE, MIN_VARIANCE};
use crate::priors::GmmPrior;
use crate::quadrature::{AdaptiveIntegrator, StandardNormalRule};

use super::StmpConfig;

const HERMITE_POINTS: usize = 64;

/// Predicted variances for one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SePoint {
    pub iter: usize,
    pub v_a_pri: f64,
    pub v_a_post: f64,
    pub v_a_ext: f64,
    pub v_b_pri: f64,
    /// `mmse(v_B^pri)`.
    pub v_b_post: f64,
    pub v_b_ext: f64,
    /// `v_B^post / E[x²]`, in dB.
    pub nmse_db: f64,
}

/// `E[Var(x | x + √v w)]` for `x ~ prior`, `w ~ N(0, 1)`.
///
/// Adaptive Gauss–Legendre over the observation, with panel breakpoints at
/// multiples of every component's marginal scale; the posterior variance of
/// a sparse prior has features of width `~√v` that a fixed rule steps over.
pub fn mmse_channel(prior: &GmmPrior, v: f64) -> Result<f64> {
    const OFFSETS: [f64; 13] = [
        -12.0, -8.0, -4.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 12.0,
    ];
    let channel = prior.perturbed(v)?;
    let mut breaks: Vec<f64> = prior
        .means()
        .iter()
        .zip(prior.variances())
        .flat_map(|(&m, &tau2)| {
            let sd = (tau2 + v).sqrt();
            OFFSETS.iter().map(move |c| m + c * sd)
        })
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let integ = AdaptiveIntegrator::new(10, 1e-13, 50);
    // Integrated in units of v, since E[Var] ≤ v.
    let mut total = 0.0;
    for pair in breaks.windows(2) {
        let ([val], _) = integ.integrate(
            |y| [channel.log_density(y).exp() * channel.mmse(y).var / v],
            pair[0],
            pair[1],
            1e-10,
        )?;
        total += val;
    }
    let total = total * v;
    if !total.is_finite() || total < 0.0 {
        return Err(Error::Quadrature {
            estimate: total,
            target: 0.0,
        });
    }
    Ok(total)
}

/// Same quantity by 64-point Gauss–Hermite over each component of the
/// observation marginal. Cheap and exact for Gaussian priors, but loses
/// several digits on sparse priors at small `v`.
pub fn mmse_channel_hermite(prior: &GmmPrior, v: f64) -> Result<f64> {
    let channel = prior.perturbed(v)?;
    let rule = StandardNormalRule::new(HERMITE_POINTS);
    let mut total = 0.0;
    for ((&w, &m), &tau2) in prior
        .weights()
        .iter()
        .zip(prior.means())
        .zip(prior.variances())
    {
        let sd = (tau2 + v).sqrt();
        total += w * rule.expect(|z| channel.mmse(m + sd * z).var);
    }
    Ok(total)
}

fn extrinsic_var(post: f64, pri: f64) -> f64 {
    if post >= pri {
        return MAX_VARIANCE;
    }
    (1.0 / (1.0 / post - 1.0 / pri)).clamp(MIN_VARIANCE, MAX_VARIANCE)
}

/// Iterates the variance recursion for `config.max_iters` steps (stopping
/// early once the variances stop changing). `spectrum` holds the nonzero
/// squared singular values of an `m × n` operator.
pub fn se_predict(
    spectrum: &[f64],
    n: usize,
    prior: &GmmPrior,
    noise_var: f64,
    config: &StmpConfig,
) -> Result<Vec<SePoint>> {
    if spectrum.is_empty() || n == 0 {
        return Err(Error::InvalidArgument(
            "state evolution needs a nonempty spectrum".into(),
        ));
    }
    if !(noise_var >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise variance must be nonnegative, got {noise_var}"
        )));
    }
    config.validate()?;
    let config = config.clone().with_prior_defaults(prior);
    let beta = config.beta.beta();
    let energy = prior.second_moment().max(f64::MIN_POSITIVE);
    let noise_var = noise_var.max(crate::lmmse::NOISE_VAR_FLOOR);

    let mut v_a_pri = config.initial_var();
    let mut old_a: Option<f64> = None;
    let mut old_b: Option<f64> = None;
    let mut out: Vec<SePoint> = Vec::with_capacity(config.max_iters);
    for iter in 1..=config.max_iters {
        let tr: f64 = spectrum
            .iter()
            .map(|&s| s / (v_a_pri * s + noise_var))
            .sum();
        let v_a_post = v_a_pri - v_a_pri * v_a_pri / n as f64 * tr;
        let v_a_ext = extrinsic_var(v_a_post, v_a_pri);
        let v_b_pri = old_a.map_or(v_a_ext, |o| beta * v_a_ext + (1.0 - beta) * o);
        old_a = Some(if config.damp_from_damped { v_b_pri } else { v_a_ext });

        let v_b_post = mmse_channel(prior, v_b_pri)?;
        let v_b_ext = extrinsic_var(v_b_post, v_b_pri);
        let next = old_b.map_or(v_b_ext, |o| beta * v_b_ext + (1.0 - beta) * o);
        old_b = Some(if config.damp_from_damped { next } else { v_b_ext });

        let settled = out.last().is_some_and(|p| {
            (p.v_b_post - v_b_post).abs() <= 1e-14 * v_b_post
                && (p.v_a_pri - v_a_pri).abs() <= 1e-14 * v_a_pri
        });
        out.push(SePoint {
            iter,
            v_a_pri,
            v_a_post,
            v_a_ext,
            v_b_pri,
            v_b_post,
            v_b_ext,
            nmse_db: 10.0 * (v_b_post / energy).log10(),
        });
        v_a_pri = next;
        if settled {
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_channel_is_conjugate() {
        let p = GmmPrior::gaussian(0.5, 2.0).unwrap();
        for v in [1e-4, 0.1, 1.0, 30.0] {
            let want = 2.0 * v / (2.0 + v);
            assert!((mmse_channel(&p, v).unwrap() - want).abs() < 1e-12 * want.max(1.0));
        }
    }

    #[test]
    fn hermite_agrees_on_gaussian_priors() {
        let p = GmmPrior::gaussian(-1.0, 0.3).unwrap();
        for v in [1e-3, 0.2, 4.0] {
            let a = mmse_channel(&p, v).unwrap();
            let b = mmse_channel_hermite(&p, v).unwrap();
            assert!((a - b).abs() < 1e-10 * a);
        }
    }

    #[test]
    fn first_extrinsic_of_noiseless_half_sampling() {
        let p = GmmPrior::gaussian(0.0, 1.0).unwrap();
        let cfg = StmpConfig {
            max_iters: 1,
            init_var: Some(1.0),
            ..Default::default()
        };
        let pts = se_predict(&vec![1.0; 50], 100, &p, 0.0, &cfg).unwrap();
        assert!((pts[0].v_a_ext - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_spectrum_rejected() {
        let p = GmmPrior::gaussian(0.0, 1.0).unwrap();
        assert!(se_predict(&[], 10, &p, 0.1, &StmpConfig::default()).is_err());
    }
}
