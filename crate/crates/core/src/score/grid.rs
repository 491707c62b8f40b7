use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing positive noise levels `σ₁ < … < σ_L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SigmaGrid(Vec<f64>);

impl SigmaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("sigma grid is empty".into()));
        }
        if values.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidArgument(
                "sigma grid values must be positive and finite".into(),
            ));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "sigma grid must be strictly increasing".into(),
            ));
        }
        Ok(Self(values))
    }

    /// `count` log-spaced values from `lo` to `hi` inclusive.
    pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count == 1 {
            return Self::new(vec![lo]);
        }
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::InvalidArgument(format!(
                "invalid sigma range [{lo}, {hi}]"
            )));
        }
        let (a, b) = (lo.ln(), hi.ln());
        let step = (b - a) / (count - 1) as f64;
        let mut v: Vec<f64> = (0..count).map(|i| (a + step * i as f64).exp()).collect();
        v[0] = lo;
        v[count - 1] = hi;
        Self::new(v)
    }

    /// Default grid: 16 levels over `[1e−3, 10] × rms`.
    pub fn default_for_rms(rms: f64) -> Result<Self> {
        Self::log_spaced(1e-3 * rms, 10.0 * rms, 16)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Piecewise-linear interpolation of per-node `values` at `sigma`,
    /// clamped to the end values outside the grid.
    pub fn interpolate(&self, values: &[f64], sigma: f64) -> f64 {
        let g = &self.0;
        debug_assert_eq!(g.len(), values.len());
        if sigma <= g[0] {
            return values[0];
        }
        let last = g.len() - 1;
        if sigma >= g[last] {
            return values[last];
        }
        let hi = g.partition_point(|&s| s <= sigma);
        let lo = hi - 1;
        if g[lo] == sigma {
            return values[lo];
        }
        let t = (sigma - g[lo]) / (g[hi] - g[lo]);
        values[lo] + t * (values[hi] - values[lo])
    }
}

impl TryFrom<Vec<f64>> for SigmaGrid {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SigmaGrid> for Vec<f64> {
    fn from(g: SigmaGrid) -> Self {
        g.0
    }
}
