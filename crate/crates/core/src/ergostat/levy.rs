use super::{par_collect, require_samples, StreamPlan};
use crate::error::{Error, Result};
use crate::grid_paths::{sample_brownian, DiscretePath, TimeGrid};
use crate::malliavin::transform_with;
use crate::rotors::RotorFamily;

/// Minimum number of paths for [`levy_check`].
pub const LEVY_MIN_PATHS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevyThresholds {
    /// Relative per-cell variance tolerance.
    pub variance_rel: f64,
    /// Correlation bound `corr_sigmas / √M`.
    pub corr_sigmas: f64,
}

impl Default for LevyThresholds {
    fn default() -> Self {
        Self {
            variance_rel: 0.03,
            corr_sigmas: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevyReport {
    pub n_paths: usize,
    /// Sample variance of each increment (flat index `i·d + c`) divided by `dt`.
    pub variance_ratios: Vec<f64>,
    pub max_variance_deviation: f64,
    /// Largest `|corr|` between two distinct increments, any coordinates.
    pub max_abs_correlation: f64,
    /// Largest `|corr|` between two coordinates of the same cell (`d ≥ 2`).
    pub max_coordinate_correlation: f64,
    pub correlation_bound: f64,
    pub variance_pass: bool,
    pub correlation_pass: bool,
}

impl LevyReport {
    pub fn passed(&self) -> bool {
        self.variance_pass && self.correlation_pass
    }
}

/// Checks that the increments of `paths` look like those of a standard
/// Brownian motion: per-cell variance `dt` and no correlation between
/// distinct increments or coordinates.
pub fn levy_check(paths: &[DiscretePath], thresholds: &LevyThresholds) -> Result<LevyReport> {
    require_samples(LEVY_MIN_PATHS, paths.len())?;
    let first = &paths[0];
    let (grid, d) = (*first.grid(), first.dim());
    if paths.iter().any(|p| *p.grid() != grid || p.dim() != d) {
        return Err(Error::ShapeMismatch("paths live on different grids".into()));
    }
    let n = grid.n_steps() * d;
    let m = paths.len() as f64;

    let mut mean = vec![0.0; n];
    for p in paths {
        for (s, x) in mean.iter_mut().zip(p.increments()) {
            *s += x;
        }
    }
    mean.iter_mut().for_each(|s| *s /= m);
    // upper triangle of the centered cross-product matrix
    let mut cov = vec![0.0; n * n];
    let mut centered = vec![0.0; n];
    for p in paths {
        for ((c, x), mu) in centered.iter_mut().zip(p.increments()).zip(&mean) {
            *c = x - mu;
        }
        for a in 0..n {
            let ca = centered[a];
            let row = &mut cov[a * n..(a + 1) * n];
            for b in a..n {
                row[b] += ca * centered[b];
            }
        }
    }
    let var: Vec<f64> = (0..n).map(|a| cov[a * n + a] / (m - 1.0)).collect();
    let variance_ratios: Vec<f64> = var.iter().map(|v| v / grid.dt()).collect();
    let max_variance_deviation = variance_ratios
        .iter()
        .map(|r| (r - 1.0).abs())
        .fold(0.0, f64::max);

    let mut max_abs_correlation = 0.0_f64;
    let mut max_coordinate_correlation = 0.0_f64;
    for a in 0..n {
        for b in a + 1..n {
            let denom = (var[a] * var[b]).sqrt() * (m - 1.0);
            // a degenerate coordinate counts as fully correlated
            let r = if denom > 0.0 { (cov[a * n + b] / denom).abs() } else { 1.0 };
            max_abs_correlation = max_abs_correlation.max(r);
            if a / d == b / d {
                max_coordinate_correlation = max_coordinate_correlation.max(r);
            }
        }
    }
    let correlation_bound = thresholds.corr_sigmas / m.sqrt();
    Ok(LevyReport {
        n_paths: paths.len(),
        max_variance_deviation,
        variance_ratios,
        max_abs_correlation,
        max_coordinate_correlation,
        correlation_bound,
        variance_pass: max_variance_deviation <= thresholds.variance_rel,
        correlation_pass: max_abs_correlation < correlation_bound,
    })
}

/// `T w` for `n_paths` fresh Brownian paths, `T` generated by level 1 of
/// `family`.
pub fn transformed_paths(
    family: &RotorFamily,
    grid: &TimeGrid,
    dim: usize,
    n_paths: usize,
    plan: StreamPlan,
) -> Result<Vec<DiscretePath>> {
    par_collect(n_paths, |p| {
        let w = sample_brownian(grid, dim, plan.path(p))?;
        let action = family.level(plan.aux(p), 1)?.action_at(&w)?;
        transform_with(&action, &w)
    })
}
