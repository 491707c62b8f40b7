//! Score models selected by the experiment config, and the fitted-model file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::priors::GmmPrior;
use crate::score::{
    AffineScore, AnalyticGmmScore, AnalyticGmmTrace, ConstantTrace, ScoreModel, TraceScoreModel,
};

use super::config::{DenoiserKind, ExperimentConfig};

/// Affine first-order model and constant trace model, as written by
/// `fit-score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FittedModel {
    pub affine: AffineScore,
    pub trace: ConstantTrace,
}

impl FittedModel {
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let m: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        AffineScore::new(m.affine.sigma_grid.clone(), m.affine.slope.clone(), m.affine.intercept.clone())?;
        ConstantTrace::new(m.trace.sigma_grid.clone(), m.trace.values.clone(), m.trace.dim)?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

pub struct Denoiser {
    pub score: Box<dyn ScoreModel>,
    pub trace: Box<dyn TraceScoreModel>,
}

impl Denoiser {
    pub fn analytic(prior: &GmmPrior) -> Self {
        Self {
            score: Box::new(AnalyticGmmScore::new(prior.clone())),
            trace: Box::new(AnalyticGmmTrace::new(prior.clone())),
        }
    }

    pub fn fitted(model: FittedModel) -> Self {
        Self {
            score: Box::new(model.affine),
            trace: Box::new(model.trace),
        }
    }

    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        match cfg.denoiser.kind {
            DenoiserKind::Analytic => Ok(Self::analytic(&cfg.prior)),
            DenoiserKind::Fitted => {
                let path = cfg.denoiser.model.as_ref().ok_or_else(|| {
                    Error::Config("field `denoiser.model`: required for fitted denoisers".into())
                })?;
                Ok(Self::fitted(FittedModel::load(path)?))
            }
        }
    }
}
