use statrs::distribution::{ContinuousCDF, Normal};

use super::{par_collect, require_samples, StreamPlan};
use crate::error::{Error, Result};
use crate::grid_paths::{sample_brownian, wiener_integral, CMVector};
use crate::rotors::RotorFamily;

pub const MIN_SAMPLES: usize = 1000;

/// Pass thresholds of [`gaussianity_report`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentThresholds {
    /// Relative variance tolerance.
    pub variance_rel: f64,
    /// `|mean| < mean_sigmas · σ / √M`.
    pub mean_sigmas: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// KS distance `< ks_factor · 1.36 / √M`.
    pub ks_factor: f64,
}

impl Default for MomentThresholds {
    fn default() -> Self {
        Self {
            variance_rel: 0.02,
            mean_sigmas: 4.0,
            skewness: 0.05,
            excess_kurtosis: 0.1,
            ks_factor: 1.5,
        }
    }
}

impl MomentThresholds {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.variance_rel,
            self.mean_sigmas,
            self.skewness,
            self.excess_kurtosis,
            self.ks_factor,
        ];
        if all.iter().all(|x| *x > 0.0 && x.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidArgument("moment thresholds must be positive".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub sample_count: usize,
    pub target_variance: f64,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub ks_distance: f64,
    pub mean_bound: f64,
    pub variance_band: (f64, f64),
    pub skewness_bound: f64,
    pub kurtosis_bound: f64,
    pub ks_bound: f64,
    pub mean_pass: bool,
    pub variance_pass: bool,
    pub skewness_pass: bool,
    pub kurtosis_pass: bool,
    pub ks_pass: bool,
}

impl MomentReport {
    pub fn passed(&self) -> bool {
        self.mean_pass && self.variance_pass && self.skewness_pass && self.kurtosis_pass && self.ks_pass
    }
}

/// Moments and one-sample Kolmogorov-Smirnov distance of `samples` against
/// `N(0, target_variance)`.
pub fn gaussianity_report(
    samples: &[f64],
    target_variance: f64,
    thresholds: &MomentThresholds,
) -> Result<MomentReport> {
    require_samples(MIN_SAMPLES, samples.len())?;
    thresholds.validate()?;
    if !(target_variance > 0.0 && target_variance.is_finite()) {
        return Err(Error::InvalidArgument("target variance must be positive".into()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("gaussianity_report sample"));
    }
    let m = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / m;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= m;
    m3 /= m;
    m4 /= m;
    let variance = m2;
    let (skewness, excess_kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (f64::NAN, f64::NAN)
    };

    let normal = Normal::new(0.0, target_variance.sqrt())
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut ks = 0.0_f64;
    for (i, x) in sorted.iter().enumerate() {
        let f = normal.cdf(*x);
        ks = ks.max(f - i as f64 / m).max((i + 1) as f64 / m - f);
    }

    let sd = target_variance.sqrt();
    let mean_bound = thresholds.mean_sigmas * sd / m.sqrt();
    let variance_band = (
        target_variance * (1.0 - thresholds.variance_rel),
        target_variance * (1.0 + thresholds.variance_rel),
    );
    let ks_bound = thresholds.ks_factor * 1.36 / m.sqrt();
    Ok(MomentReport {
        sample_count: samples.len(),
        target_variance,
        mean,
        variance,
        skewness,
        excess_kurtosis,
        ks_distance: ks,
        mean_bound,
        variance_band,
        skewness_bound: thresholds.skewness,
        kurtosis_bound: thresholds.excess_kurtosis,
        ks_bound,
        mean_pass: mean.abs() < mean_bound,
        variance_pass: variance >= variance_band.0 && variance <= variance_band.1,
        skewness_pass: skewness.abs() < thresholds.skewness,
        kurtosis_pass: excess_kurtosis.abs() < thresholds.excess_kurtosis,
        ks_pass: ks < ks_bound,
    })
}

/// Samples of `δ(R h)(w)` with `R = family.level(aux, 1)` evaluated at `w`,
/// one per path of `plan`.
pub fn rotated_integral_samples(
    family: &RotorFamily,
    h: &CMVector,
    n_paths: usize,
    plan: StreamPlan,
) -> Result<Vec<f64>> {
    let (grid, dim) = (*h.grid(), h.dim());
    par_collect(n_paths, |p| {
        let w = sample_brownian(&grid, dim, plan.path(p))?;
        let rh = family.level(plan.aux(p), 1)?.action_at(&w)?.apply(h)?;
        wiener_integral(&rh, &w)
    })
}
