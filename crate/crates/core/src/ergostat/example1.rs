use std::f64::consts::FRAC_2_PI;

use nalgebra::{DMatrix, DVector};

use super::{par_collect, require_samples, StreamPlan};
use crate::error::{Error, Result};
use crate::grid_paths::{sample_brownian, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example1Row {
    pub s: f64,
    pub t: f64,
    pub n: usize,
    /// `(A_{s,t}^n x, y)`.
    pub value: f64,
    /// `‖A_{s,t}‖₂^n |x||y|`.
    pub envelope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example1Curve {
    pub rows: Vec<Example1Row>,
    /// Pairs with `|(A^{n_max} x, y)| > tol · |x||y|`.
    pub violations: Vec<(f64, f64)>,
    pub envelope_ok: bool,
}

/// Powers of the two-point matrix function along grid pairs `(s, t)`.
pub fn example1_decay(
    a: &dyn Fn(f64, f64) -> DMatrix<f64>,
    x: &[f64],
    y: &[f64],
    pairs: &[(f64, f64)],
    n_max: usize,
    tol: f64,
) -> Result<Example1Curve> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::ShapeMismatch("x and y must have the same positive length".into()));
    }
    let (xv, yv) = (DVector::from_column_slice(x), DVector::from_column_slice(y));
    let scale = xv.norm() * yv.norm();
    let mut rows = Vec::with_capacity(pairs.len() * n_max);
    let mut violations = Vec::new();
    let mut envelope_ok = true;
    for &(s, t) in pairs {
        let m = a(s, t);
        if m.nrows() != x.len() || m.ncols() != x.len() {
            return Err(Error::ShapeMismatch(format!(
                "A({s}, {t}) is {}x{}, vectors have length {}",
                m.nrows(),
                m.ncols(),
                x.len()
            )));
        }
        let norm = m.clone().svd(false, false).singular_values.amax();
        let mut v = xv.clone();
        let mut last = 0.0;
        for n in 1..=n_max {
            v = &m * v;
            let value = v.dot(&yv);
            if !value.is_finite() {
                return Err(Error::NonFinite("example1_decay power"));
            }
            let envelope = norm.powi(n as i32) * scale;
            envelope_ok &= value.abs() <= envelope * (1.0 + 1e-12) + 1e-15;
            rows.push(Example1Row {
                s,
                t,
                n,
                value,
                envelope,
            });
            last = value;
        }
        if n_max > 0 && last.abs() > tol * scale {
            violations.push((s, t));
        }
    }
    Ok(Example1Curve {
        rows,
        violations,
        envelope_ok,
    })
}

/// `E[sign b_s sign b_t] = (2/π) arcsin √(min/max)` for a Brownian motion
/// `b`, with `sign(0) = +1`.
pub fn sign_two_point(s: f64, t: f64) -> DMatrix<f64> {
    let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
    let v = if hi == 0.0 {
        1.0
    } else if lo == 0.0 {
        0.0
    } else {
        FRAC_2_PI * (lo / hi).sqrt().asin()
    };
    DMatrix::from_element(1, 1, v)
}

/// Monte Carlo estimate of `E[sign b(s_i) sign b(s_j)]` on the grid points
/// `s_0..s_{n-1}` with `sign(0) = +1`. Returns row-major `n × n` means and
/// standard errors.
pub fn sign_correlation_mc(
    grid: &TimeGrid,
    n_paths: usize,
    plan: StreamPlan,
) -> Result<(Vec<f64>, Vec<f64>)> {
    require_samples(2, n_paths)?;
    let n = grid.n_steps();
    let signs = par_collect(n_paths, |p| {
        let b = sample_brownian(grid, 1, plan.aux(p))?;
        let mut pos = 0.0;
        Ok((0..n)
            .map(|i| {
                let s = if pos < 0.0 { -1.0 } else { 1.0 };
                pos += b.increment(i, 0);
                s
            })
            .collect::<Vec<f64>>())
    })?;
    let m = n_paths as f64;
    let mut mean = vec![0.0; n * n];
    for s in &signs {
        for i in 0..n {
            for j in 0..n {
                mean[i * n + j] += s[i] * s[j];
            }
        }
    }
    mean.iter_mut().for_each(|x| *x /= m);
    // products are ±1, so the sample variance is (1 − mean²)·m/(m − 1)
    let se = mean
        .iter()
        .map(|x| ((1.0 - x * x).max(0.0) / (m - 1.0)).sqrt())
        .collect();
    Ok((mean, se))
}
