//! Monte Carlo harness.
//!
//! All estimators follow the same pattern: per-path work is evaluated in
//! parallel from per-path random streams and collected in path order, then
//! reduced sequentially. Results are therefore bit-for-bit identical for any
//! number of worker threads.

mod birkhoff;
mod example1;
mod girsanov;
mod levy;
mod mixing;
mod moments;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid_paths::RngStream;

pub use birkhoff::{birkhoff_orbit, birkhoff_trace, invariant_drift, ErgodicTrace, MIN_STARTS};
pub use example1::{
    example1_decay, sign_correlation_mc, sign_two_point, Example1Curve, Example1Row,
};
pub use girsanov::{girsanov_check, CosineFamily, GirsanovReport};
pub use levy::{levy_check, transformed_paths, LevyReport, LevyThresholds, LEVY_MIN_PATHS};
pub use mixing::{
    mixing_curve, qn_decay, wick_mixing_curve, DecayCurve, DecayRow, MixingCurve, MixingRow,
    WickMixingCurve, WickMixingRow, MIN_CURVE_PATHS,
};
pub use moments::{
    gaussianity_report, rotated_integral_samples, MomentReport, MomentThresholds, MIN_SAMPLES,
};

/// Random stream assignment for a Monte Carlo run: path `p` draws its
/// Brownian path from `path(p)` and its rotor randomness from `aux(p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamPlan {
    pub seed: u64,
}

impl StreamPlan {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn path(&self, p: usize) -> RngStream {
        RngStream::new(self.seed, 2 * p as u64)
    }

    pub fn aux(&self, p: usize) -> RngStream {
        RngStream::new(self.seed, 2 * p as u64 + 1)
    }
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std_error: (var / n).sqrt(),
        }
    }

    /// Whether `target` lies within `k` standard errors of the mean.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error
    }
}

pub(crate) fn par_collect<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

pub(crate) fn require_samples(needed: usize, got: usize) -> Result<()> {
    if got < needed {
        return Err(Error::InsufficientSamples { needed, got });
    }
    Ok(())
}

/// Sample standard deviation (denominator `n − 1`).
pub(crate) fn sample_sd(xs: &[f64]) -> f64 {
    let e = Estimate::from_samples(xs);
    e.std_error * (xs.len() as f64).sqrt()
}
