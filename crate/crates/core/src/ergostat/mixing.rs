use super::{par_collect, require_samples, Estimate, StreamPlan};
use crate::chaos::{wick_exponential, wick_from_exponent};
use crate::error::{Error, Result};
use crate::grid_paths::{cm_inner, sample_brownian, wiener_integral, CMVector, DiscretePath, TimeGrid};
use crate::malliavin::RotorSequence;
use crate::rotors::RotorFamily;

/// Minimum number of paths for the curve estimators.
pub const MIN_CURVE_PATHS: usize = 1000;

const CS_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingRow {
    pub n: usize,
    /// Estimate of `E[F · G∘T^n]`.
    pub estimate: f64,
    pub std_error: f64,
    pub reference: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixingCurve {
    pub rows: Vec<MixingRow>,
}

/// `E[F · G∘T^n]` for `n = 0..=n_max`. The reference is `reference` when
/// given, otherwise the product of the sample means of `F` and `G`.
#[allow(clippy::too_many_arguments)]
pub fn mixing_curve(
    f: &(dyn Fn(&DiscretePath) -> f64 + Sync),
    g: &(dyn Fn(&DiscretePath) -> f64 + Sync),
    family: &RotorFamily,
    grid: &TimeGrid,
    dim: usize,
    n_max: usize,
    n_paths: usize,
    plan: StreamPlan,
    reference: Option<f64>,
) -> Result<MixingCurve> {
    require_samples(MIN_CURVE_PATHS, n_paths)?;
    let per_path = par_collect(n_paths, |p| {
        let w = sample_brownian(grid, dim, plan.path(p))?;
        let seq = RotorSequence::build(family, plan.aux(p), &w, n_max)?;
        let fw = f(&w);
        let mut vals: Vec<f64> = (0..=n_max).map(|n| fw * g(seq.path(n))).collect();
        vals.push(fw);
        vals.push(g(&w));
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mixing_curve functional"));
        }
        Ok(vals)
    })?;
    let column = |j: usize| per_path.iter().map(|v| v[j]).collect::<Vec<_>>();
    let reference = reference.unwrap_or_else(|| {
        Estimate::from_samples(&column(n_max + 1)).mean
            * Estimate::from_samples(&column(n_max + 2)).mean
    });
    let rows = (0..=n_max)
        .map(|n| {
            let e = Estimate::from_samples(&column(n));
            MixingRow {
                n,
                estimate: e.mean,
                std_error: e.std_error,
                reference,
            }
        })
        .collect();
    Ok(MixingCurve { rows })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WickMixingRow {
    pub n: usize,
    /// Estimate of `E[ρ(δk) · ρ(δh)∘T^n]`.
    pub estimate: f64,
    pub std_error: f64,
    /// Estimate of `E[exp((k, Q_n h)_H)]`.
    pub reference: f64,
    pub reference_std_error: f64,
    /// Mean and standard error of the per-path difference
    /// `ρ(δk) ρ(δh)∘T^n − exp((k, Q_n h)_H)`.
    pub difference: f64,
    pub difference_std_error: f64,
    /// Number of samples whose Wick exponent was clamped.
    pub saturated: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WickMixingCurve {
    pub rows: Vec<WickMixingRow>,
}

/// Mixing curve of the Wick exponentials `F = ρ(δk)`, `G = ρ(δh)`, with the
/// paired reference `exp((k, Q_n h)_H)` evaluated on the same randomness.
pub fn wick_mixing_curve(
    family: &RotorFamily,
    h: &CMVector,
    k: &CMVector,
    n_max: usize,
    n_paths: usize,
    plan: StreamPlan,
) -> Result<WickMixingCurve> {
    require_samples(MIN_CURVE_PATHS, n_paths)?;
    h.same_space(k)?;
    let (grid, dim) = (*h.grid(), h.dim());
    let half_h = 0.5 * h.norm_sq();
    // per path and n: (product, reference, saturated)
    let per_path = par_collect(n_paths, |p| {
        let w = sample_brownian(&grid, dim, plan.path(p))?;
        let seq = RotorSequence::build(family, plan.aux(p), &w, n_max)?;
        let fk = wick_exponential(k, &w)?;
        let mut q = h.clone();
        let mut out = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            if n > 0 {
                q = seq.apply_q(n, h)?;
            }
            let gh = wick_from_exponent(wiener_integral(h, seq.path(n))? - half_h);
            let r = cm_inner(k, &q)?.exp();
            out.push((fk.value * gh.value, r, fk.saturated || gh.saturated));
        }
        Ok(out)
    })?;
    let rows = (0..=n_max)
        .map(|n| {
            let prod: Vec<f64> = per_path.iter().map(|v| v[n].0).collect();
            let refs: Vec<f64> = per_path.iter().map(|v| v[n].1).collect();
            let diff: Vec<f64> = per_path.iter().map(|v| v[n].0 - v[n].1).collect();
            let (e, r, d) = (
                Estimate::from_samples(&prod),
                Estimate::from_samples(&refs),
                Estimate::from_samples(&diff),
            );
            WickMixingRow {
                n,
                estimate: e.mean,
                std_error: e.std_error,
                reference: r.mean,
                reference_std_error: r.std_error,
                difference: d.mean,
                difference_std_error: d.std_error,
                saturated: per_path.iter().filter(|v| v[n].2).count(),
            }
        })
        .collect();
    Ok(WickMixingCurve { rows })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRow {
    pub n: usize,
    pub mean: f64,
    pub second_moment: f64,
    pub second_moment_std_error: f64,
    /// Fraction of samples with `|(Q_n h, k)_H| > ε`.
    pub exceedance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayCurve {
    pub eps: f64,
    pub rows: Vec<DecayRow>,
    /// `max (|(Q_n h, k)_H| − |h||k|)` over all samples.
    pub max_cauchy_schwarz_excess: f64,
    pub cauchy_schwarz_ok: bool,
    /// Second moments strictly decreasing in `n`.
    pub strictly_decreasing: bool,
    /// Exceedance fractions nonincreasing over the last half of the curve.
    pub monotone_tail: bool,
    /// Exceedance at `n_max` below 0.05.
    pub converged: bool,
}

/// Distribution summary of `(Q_n h, k)_H` for `n = 1..=n_max`.
pub fn qn_decay(
    family: &RotorFamily,
    h: &CMVector,
    k: &CMVector,
    n_max: usize,
    n_paths: usize,
    eps: f64,
    plan: StreamPlan,
) -> Result<DecayCurve> {
    require_samples(MIN_CURVE_PATHS, n_paths)?;
    h.same_space(k)?;
    if h.is_zero() || k.is_zero() {
        return Err(Error::ZeroVector);
    }
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be positive".into()));
    }
    let (grid, dim) = (*h.grid(), h.dim());
    let per_path = par_collect(n_paths, |p| {
        let w = sample_brownian(&grid, dim, plan.path(p))?;
        let seq = RotorSequence::build(family, plan.aux(p), &w, n_max)?;
        // (Q_n h, k) = (h, Q_nᵀ k)
        seq.q_transpose_vectors(k)?
            .iter()
            .map(|qk| cm_inner(h, qk))
            .collect::<Result<Vec<_>>>()
    })?;
    let m = n_paths as f64;
    let bound = h.norm() * k.norm();
    let max_cauchy_schwarz_excess = per_path
        .iter()
        .flatten()
        .map(|x| x.abs() - bound)
        .fold(f64::NEG_INFINITY, f64::max);
    let rows: Vec<DecayRow> = (0..n_max)
        .map(|j| {
            let xs: Vec<f64> = per_path.iter().map(|v| v[j]).collect();
            let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
            let s = Estimate::from_samples(&sq);
            DecayRow {
                n: j + 1,
                mean: xs.iter().sum::<f64>() / m,
                second_moment: s.mean,
                second_moment_std_error: s.std_error,
                exceedance: xs.iter().filter(|x| x.abs() > eps).count() as f64 / m,
            }
        })
        .collect();
    let strictly_decreasing = rows.windows(2).all(|w| w[1].second_moment < w[0].second_moment);
    let tail = &rows[rows.len() / 2..];
    let monotone_tail = tail.windows(2).all(|w| w[1].exceedance <= w[0].exceedance);
    let converged = rows[rows.len() - 1].exceedance < 0.05;
    Ok(DecayCurve {
        eps,
        rows,
        max_cauchy_schwarz_excess,
        cauchy_schwarz_ok: max_cauchy_schwarz_excess <= CS_SLACK,
        strictly_decreasing,
        monotone_tail,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotors::Rotor;

    fn ones(g: TimeGrid) -> CMVector {
        CMVector::from_fn(g, 1, |_, _| 1.0).unwrap()
    }

    #[test]
    fn g_one_gives_mean_of_f() {
        let g = TimeGrid::new(8).unwrap();
        let h = ones(g);
        let f = move |w: &DiscretePath| wiener_integral(&h, w).unwrap().cos();
        let fam = RotorFamily::Sign { grid: g };
        let c = mixing_curve(&f, &|_| 1.0, &fam, &g, 1, 3, 2000, StreamPlan::new(1), None).unwrap();
        let first = c.rows[0].estimate;
        assert!(c.rows.iter().all(|r| r.estimate == first));
        assert!((c.rows[0].reference - first).abs() < 1e-12);
    }

    #[test]
    fn wick_second_moment_at_zero() {
        let g = TimeGrid::new(16).unwrap();
        let h = ones(g);
        let fam = RotorFamily::Sign { grid: g };
        let c = wick_mixing_curve(&fam, &h, &h, 2, 100_000, StreamPlan::new(2)).unwrap();
        let r0 = c.rows[0];
        assert!(r0.std_error > 0.0);
        assert!((r0.estimate - std::f64::consts::E).abs() < 4.0 * r0.std_error);
        assert!((r0.reference - std::f64::consts::E).abs() < 1e-9);
    }

    #[test]
    fn deterministic_rotor_matches_exact_reference() {
        let g = TimeGrid::new(8).unwrap();
        let h = ones(g);
        let k = CMVector::from_fn(g, 1, |i, _| if i < 4 { 1.0 } else { -0.5 }).unwrap();
        let r = Rotor::constant_matrix(1, vec![-1.0]).unwrap();
        let fam = RotorFamily::Fixed(r);
        let c = wick_mixing_curve(&fam, &h, &k, 3, 50_000, StreamPlan::new(3)).unwrap();
        let hk = cm_inner(&h, &k).unwrap();
        for row in &c.rows {
            let exact = (if row.n % 2 == 0 { hk } else { -hk }).exp();
            assert!((row.reference - exact).abs() < 1e-12);
            assert!((row.estimate - exact).abs() < 4.0 * row.std_error);
        }
    }

    #[test]
    fn identity_gives_constant_inner_product() {
        let g = TimeGrid::new(8).unwrap();
        let h = ones(g);
        let k = CMVector::from_fn(g, 1, |i, _| i as f64).unwrap();
        let fam = RotorFamily::Fixed(Rotor::Identity);
        let c = qn_decay(&fam, &h, &k, 4, 1000, 0.1, StreamPlan::new(4)).unwrap();
        let hk = cm_inner(&h, &k).unwrap();
        for row in &c.rows {
            assert_eq!(row.mean, hk);
        }
        assert!(!c.strictly_decreasing);
        assert!(c.cauchy_schwarz_ok);
    }

    #[test]
    fn sign_rotor_second_moment_decreases() {
        let g = TimeGrid::new(32).unwrap();
        let h = ones(g);
        let fam = RotorFamily::Sign { grid: g };
        let c = qn_decay(&fam, &h, &h, 4, 20_000, 0.1, StreamPlan::new(5)).unwrap();
        assert!(c.strictly_decreasing);
        assert!(c.cauchy_schwarz_ok);
        assert!((c.rows[0].second_moment - 0.5).abs() < 0.03);
    }

    #[test]
    fn zero_vectors_rejected() {
        let g = TimeGrid::new(4).unwrap();
        let fam = RotorFamily::Fixed(Rotor::Identity);
        let z = CMVector::zeros(g, 1).unwrap();
        assert_eq!(
            qn_decay(&fam, &z, &ones(g), 2, 1000, 0.1, StreamPlan::new(0)),
            Err(Error::ZeroVector)
        );
    }
}
