//! Gauss–Legendre and Gauss–Hermite rules, plus an adaptive Gauss–Legendre
//! integrator for vector-valued integrands.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Nodes and weights of a quadrature rule.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n > 0);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Rule { nodes, weights }
}

/// `n`-point Gauss–Hermite rule for the weight `exp(−x²)` on the real line.
pub fn gauss_hermite(n: usize) -> Rule {
    assert!(n > 0);
    // π^(−1/4)
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    let mut z: f64 = 0.0;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let (mut p1, mut p2) = (PIM4, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-14 * z1.abs().max(1.0) {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        let w = 2.0 / (pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Rule { nodes, weights }
}

/// Expectations over a standard normal variable via Gauss–Hermite.
#[derive(Debug, Clone)]
pub struct StandardNormalRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl StandardNormalRule {
    pub fn new(n: usize) -> Self {
        let rule = gauss_hermite(n);
        let scale = PI.sqrt().recip();
        Self {
            nodes: rule.nodes.iter().map(|x| x * std::f64::consts::SQRT_2).collect(),
            weights: rule.weights.iter().map(|w| w * scale).collect(),
        }
    }

    /// `E[f(Z)]`, `Z ~ N(0, 1)`.
    pub fn expect(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(z))
            .sum()
    }
}

/// Adaptive bisection integrator built on a fixed Gauss–Legendre rule.
///
/// An interval is accepted when the whole-interval estimate agrees with the
/// sum of its two halves within the local tolerance, for every component.
#[derive(Debug, Clone)]
pub struct AdaptiveIntegrator {
    rule: Rule,
    local_tol: f64,
    max_depth: u32,
}

impl Default for AdaptiveIntegrator {
    fn default() -> Self {
        Self::new(10, 1e-11, 40)
    }
}

impl AdaptiveIntegrator {
    pub fn new(points: usize, local_tol: f64, max_depth: u32) -> Self {
        Self {
            rule: gauss_legendre(points),
            local_tol,
            max_depth,
        }
    }

    fn panel<const K: usize>(&self, f: &impl Fn(f64) -> [f64; K], a: f64, b: f64) -> [f64; K] {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = [0.0; K];
        for (&x, &w) in self.rule.nodes.iter().zip(&self.rule.weights) {
            let v = f(mid + half * x);
            for k in 0..K {
                acc[k] += w * v[k];
            }
        }
        acc.map(|s| s * half)
    }

    /// Integrates `f` over `[a, b]`; returns the estimate and the summed
    /// error estimate. Fails when the depth limit is hit with the error
    /// estimate above `target`.
    pub fn integrate<const K: usize>(
        &self,
        f: impl Fn(f64) -> [f64; K],
        a: f64,
        b: f64,
        target: f64,
    ) -> Result<([f64; K], f64)> {
        let mut total = [0.0; K];
        let mut err = 0.0;
        let whole = self.panel(&f, a, b);
        let mut stack = vec![(a, b, whole, self.local_tol, 0u32)];
        while let Some((lo, hi, est, tol, depth)) = stack.pop() {
            let mid = 0.5 * (lo + hi);
            let left = self.panel(&f, lo, mid);
            let right = self.panel(&f, mid, hi);
            let diff = (0..K)
                .map(|k| (left[k] + right[k] - est[k]).abs())
                .fold(0.0, f64::max);
            if diff <= tol || depth >= self.max_depth {
                for k in 0..K {
                    total[k] += left[k] + right[k];
                }
                err += diff;
            } else {
                stack.push((lo, mid, left, tol * 0.5, depth + 1));
                stack.push((mid, hi, right, tol * 0.5, depth + 1));
            }
        }
        if err > target {
            return Err(Error::Quadrature {
                estimate: err,
                target,
            });
        }
        Ok((total, err))
    }
}
