//! Orthonormal DCT-II and its inverse.
//!
//! With the orthonormal scaling the transform matrix `W` satisfies
//! `W Wᵀ = I`, so the inverse is the transpose (an orthonormal DCT-III).

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};

#[derive(Clone)]
pub struct OrthoDct {
    len: usize,
    plan: Arc<dyn TransformType2And3<f64>>,
}

impl fmt::Debug for OrthoDct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OrthoDct").field("len", &self.len).finish()
    }
}

impl OrthoDct {
    pub fn new(len: usize) -> Self {
        assert!(len > 0, "DCT length must be positive");
        let plan = DctPlanner::new().plan_dct2(len);
        Self { len, plan }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-place orthonormal DCT-II.
    pub fn forward(&self, buf: &mut [f64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.plan.process_dct2(buf);
        let scale = (2.0 / self.len as f64).sqrt();
        buf.iter_mut().for_each(|v| *v *= scale);
        buf[0] *= FRAC_1_SQRT_2;
    }

    /// In-place inverse of [`forward`](Self::forward).
    pub fn inverse(&self, buf: &mut [f64]) {
        debug_assert_eq!(buf.len(), self.len);
        // rustdct's DCT-III halves the DC term.
        buf[0] *= SQRT_2;
        self.plan.process_dct3(buf);
        let scale = (2.0 / self.len as f64).sqrt();
        buf.iter_mut().for_each(|v| *v *= scale);
    }
}

/// O(N²) orthonormal DCT-II straight from the definition. Reference only.
pub fn naive_dct2(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let nf = n as f64;
    (0..n)
        .map(|k| {
            let c = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            let sum: f64 = x
                .iter()
                .enumerate()
                .map(|(i, &xi)| xi * (PI * (i as f64 + 0.5) * k as f64 / nf).cos())
                .sum();
            c * sum
        })
        .collect()
}

/// O(N²) transpose of [`naive_dct2`].
pub fn naive_dct3(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let nf = n as f64;
    (0..n)
        .map(|i| {
            y.iter()
                .enumerate()
                .map(|(k, &yk)| {
                    let c = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
                    c * yk * (PI * (i as f64 + 0.5) * k as f64 / nf).cos()
                })
                .sum()
        })
        .collect()
}
