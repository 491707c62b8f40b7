//! Experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::priors::GmmPrior;
use crate::stmp::StmpConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    DenseGaussian,
    PartialOrthogonal,
}

/// How `delta0` is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseScale {
    /// `delta0` is the noise standard deviation.
    #[default]
    Absolute,
    /// `delta0` multiplies the prior RMS `sqrt(E[x²])`.
    PriorRms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DenoiserKind {
    #[default]
    Analytic,
    /// Affine score + constant trace loaded from `model`.
    Fitted,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiserConfig {
    pub kind: DenoiserKind,
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Values of `M/N`.
    pub ratios: Vec<f64>,
    pub delta0s: Vec<f64>,
    /// Worker threads; all cores when absent.
    #[serde(default)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Rows of the training set.
    pub samples: usize,
    /// Row length.
    pub dim: usize,
    /// Noise levels; a log-spaced grid scaled to the prior RMS when absent.
    pub sigmas: Option<Vec<f64>>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            dim: 1,
            sigmas: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m: usize,
    pub operator_kind: OperatorKind,
    pub prior: GmmPrior,
    pub delta0: f64,
    #[serde(default)]
    pub noise_scale: NoiseScale,
    #[serde(default)]
    pub stmp: StmpConfig,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    pub output_path: PathBuf,
    #[serde(default)]
    pub denoiser: DenoiserConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub fit: FitConfig,
}

fn one() -> usize {
    1
}

fn field_error(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("field `{field}`: {msg}"))
}

impl ExperimentConfig {
    /// Parses and validates. Syntax and type errors carry the line and
    /// column; semantic errors name the field.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), strip(e))))?;
        let base = path.parent().unwrap_or(Path::new(""));
        if cfg.output_path.is_relative() {
            cfg.output_path = base.join(&cfg.output_path);
        }
        if let Some(model) = cfg.denoiser.model.as_mut() {
            if model.is_relative() {
                *model = base.join(&*model);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(field_error("n", "must be at least 1"));
        }
        if self.m == 0 || self.m > self.n {
            return Err(field_error("m", format!("must be in 1..={}, got {}", self.n, self.m)));
        }
        if !(self.delta0 >= 0.0) || !self.delta0.is_finite() {
            return Err(field_error("delta0", "must be finite and nonnegative"));
        }
        if self.trials == 0 {
            return Err(field_error("trials", "must be at least 1"));
        }
        self.stmp
            .validate()
            .map_err(|e| field_error("stmp", strip(e)))?;
        if self.denoiser.kind == DenoiserKind::Fitted && self.denoiser.model.is_none() {
            return Err(field_error("denoiser.model", "required when kind = \"fitted\""));
        }
        if let Some(s) = &self.sweep {
            if s.ratios.is_empty() || s.ratios.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
                return Err(field_error("sweep.ratios", "must be a nonempty list in (0, 1]"));
            }
            if s.delta0s.is_empty() || s.delta0s.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
                return Err(field_error(
                    "sweep.delta0s",
                    "must be a nonempty list of nonnegative values",
                ));
            }
            if s.workers == Some(0) {
                return Err(field_error("sweep.workers", "must be at least 1"));
            }
        }
        if self.fit.samples < 3 {
            return Err(field_error("fit.samples", "must be at least 3"));
        }
        if self.fit.dim == 0 {
            return Err(field_error("fit.dim", "must be at least 1"));
        }
        Ok(())
    }

    /// Noise standard deviation for a given `delta0` under [`NoiseScale`].
    pub fn noise_std(&self, delta0: f64) -> f64 {
        match self.noise_scale {
            NoiseScale::Absolute => delta0,
            NoiseScale::PriorRms => delta0 * self.prior.second_moment().sqrt(),
        }
    }

    /// STMP settings with an unset initial variance taken from the prior.
    pub fn stmp_config(&self) -> StmpConfig {
        self.stmp.clone().with_prior_defaults(&self.prior)
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Config(s) | Error::InvalidArgument(s) => s,
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
n = 64
m = 32
operator_kind = "partial-orthogonal"
delta0 = 0.1
output_path = "out"

[prior]
weights = [1.0]
means = [0.0]
variances = [1.0]
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml_str(BASE).unwrap();
        assert_eq!(cfg.trials, 1);
        assert_eq!(cfg.stmp, StmpConfig::default());
        assert_eq!(cfg.operator_kind, OperatorKind::PartialOrthogonal);
        assert!(cfg.sweep.is_none());
        assert_eq!(cfg.stmp_config().init_var, Some(1.0));
    }

    #[test]
    fn missing_field_is_named() {
        let text = BASE.replace("operator_kind = \"partial-orthogonal\"\n", "");
        let msg = ExperimentConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(msg.contains("operator_kind"), "{msg}");
    }

    #[test]
    fn bad_value_reports_line() {
        let text = BASE.replace("m = 32", "m = \"many\"");
        let msg = ExperimentConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let text = BASE.replace("m = 32", "m = 100");
        let msg = ExperimentConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(msg.contains("`m`"), "{msg}");
        let text = format!("{BASE}\n[stmp]\nbeta = 1.5\n");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let text = format!("{BASE}\n[sweep]\nratios = [0.25, 0.5]\ndelta0s = [0.01]\n");
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}
