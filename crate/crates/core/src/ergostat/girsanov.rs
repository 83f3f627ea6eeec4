use super::{par_collect, require_samples, Estimate, StreamPlan};
use crate::chaos::wick_from_exponent;
use crate::error::{Error, Result};
use crate::grid_paths::{sample_brownian, wiener_integral, CMVector, DiscretePath};
use crate::malliavin::RotorSequence;
use crate::rotors::RotorFamily;

use super::mixing::MIN_CURVE_PATHS;

/// Bounded test functional `F(w) = Σ_l a_l cos(δk_l(w))`.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineFamily {
    terms: Vec<(f64, CMVector)>,
}

impl CosineFamily {
    pub fn new(terms: Vec<(f64, CMVector)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidArgument("empty cosine family".into()));
        }
        for (a, k) in &terms {
            if !a.is_finite() {
                return Err(Error::NonFinite("cosine weight"));
            }
            k.same_space(&terms[0].1)?;
        }
        Ok(Self { terms })
    }

    pub fn eval(&self, w: &DiscretePath) -> Result<f64> {
        let mut s = 0.0;
        for (a, k) in &self.terms {
            s += a * wiener_integral(k, w)?.cos();
        }
        Ok(s)
    }

    /// `E[F] = Σ_l a_l exp(−|k_l|²/2)` under Wiener measure.
    pub fn exact_mean(&self) -> f64 {
        self.terms
            .iter()
            .map(|(a, k)| a * (-0.5 * k.norm_sq()).exp())
            .sum()
    }

    /// `sup |F| ≤ Σ_l |a_l|`.
    pub fn bound(&self) -> f64 {
        self.terms.iter().map(|(a, _)| a.abs()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GirsanovReport {
    pub n_levels: usize,
    /// `E[F(w + Q_n h) exp(−δ(Q_n h) − ½|h|²)]`.
    pub lhs: Estimate,
    /// `E[F]` in closed form.
    pub rhs: f64,
    /// `E[F]` by Monte Carlo on the same paths.
    pub rhs_mc: Estimate,
    pub gap: f64,
    /// `4σ` band for the gap.
    pub band: f64,
    /// Samples whose exponential weight was clamped.
    pub saturated: usize,
}

impl GirsanovReport {
    pub fn passed(&self) -> bool {
        self.gap.abs() < self.band && self.saturated == 0
    }
}

/// Monte Carlo check of the change of variables `w ↦ w + Q_n(w) h` with the
/// density `exp(−δ(Q_n h) − ½|h|²)`, for a cosine test functional.
///
/// `δ(Q_n h)` is evaluated as the Itô sum, which is the divergence when
/// `Q_n h` is adapted or independent of `w`.
pub fn girsanov_check(
    family: &RotorFamily,
    n_levels: usize,
    h: &CMVector,
    test: &CosineFamily,
    n_paths: usize,
    plan: StreamPlan,
) -> Result<GirsanovReport> {
    require_samples(MIN_CURVE_PATHS, n_paths)?;
    h.same_space(&test.terms[0].1)?;
    let (grid, dim) = (*h.grid(), h.dim());
    let half = 0.5 * h.norm_sq();
    let per_path = par_collect(n_paths, |p| {
        let w = sample_brownian(&grid, dim, plan.path(p))?;
        let q = if n_levels == 0 {
            h.clone()
        } else {
            RotorSequence::build(family, plan.aux(p), &w, n_levels)?.apply_q(n_levels, h)?
        };
        let weight = wick_from_exponent(-wiener_integral(&q, &w)? - half);
        let shifted = w.shifted(&q, 1.0)?;
        Ok((test.eval(&shifted)? * weight.value, test.eval(&w)?, weight.saturated))
    })?;
    let lhs_samples: Vec<f64> = per_path.iter().map(|v| v.0).collect();
    let rhs_samples: Vec<f64> = per_path.iter().map(|v| v.1).collect();
    let lhs = Estimate::from_samples(&lhs_samples);
    let rhs = test.exact_mean();
    Ok(GirsanovReport {
        n_levels,
        lhs,
        rhs,
        rhs_mc: Estimate::from_samples(&rhs_samples),
        gap: lhs.mean - rhs,
        band: 4.0 * lhs.std_error,
        saturated: per_path.iter().filter(|v| v.2).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_paths::TimeGrid;
    use crate::rotors::Rotor;

    fn family(g: TimeGrid) -> CosineFamily {
        let k1 = CMVector::from_fn(g, 1, |_, _| 1.0).unwrap();
        let k2 = CMVector::from_fn(g, 1, |i, _| if i < 8 { 2.0 } else { -1.0 }).unwrap();
        CosineFamily::new(vec![(0.5, k1), (0.5, k2)]).unwrap()
    }

    #[test]
    fn zero_shift_has_zero_gap_in_expectation() {
        let g = TimeGrid::new(16).unwrap();
        let f = family(g);
        let z = CMVector::zeros(g, 1).unwrap();
        let fam = RotorFamily::Sign { grid: g };
        let rep = girsanov_check(&fam, 1, &z, &f, 2000, StreamPlan::new(1)).unwrap();
        // with h = 0 both sides are the same sample
        assert_eq!(rep.lhs, rep.rhs_mc);
    }

    #[test]
    fn deterministic_rotor_gap_within_band() {
        let g = TimeGrid::new(16).unwrap();
        let f = family(g);
        let h = CMVector::from_fn(g, 1, |i, _| if i % 2 == 0 { 1.0 } else { 0.5 }).unwrap();
        let fam = RotorFamily::Fixed(Rotor::constant_matrix(1, vec![-1.0]).unwrap());
        let rep = girsanov_check(&fam, 1, &h, &f, 50_000, StreamPlan::new(2)).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn exact_mean_and_bound() {
        let g = TimeGrid::new(16).unwrap();
        let f = family(g);
        let expect = 0.5 * (-0.5f64).exp() + 0.5 * (-0.5f64 * 2.5).exp();
        assert!((f.exact_mean() - expect).abs() < 1e-15);
        assert_eq!(f.bound(), 1.0);
    }
}
