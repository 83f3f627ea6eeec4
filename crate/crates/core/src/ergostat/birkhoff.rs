use super::{par_collect, require_samples, sample_sd, StreamPlan};
use crate::error::{Error, Result};
use crate::grid_paths::{sample_brownian, DiscretePath, RngStream, TimeGrid};
use crate::malliavin::transform_with;
use crate::rotors::RotorFamily;

/// Minimum number of starting paths for a dispersion estimate.
pub const MIN_STARTS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicTrace {
    /// `A_n = (1/n) Σ_{i ≤ n} F(T^i w)`, `n = 1..N`, one row per starting path.
    pub partial_averages: Vec<Vec<f64>>,
    /// `A_N` per starting path.
    pub final_averages: Vec<f64>,
    pub mean_final: f64,
    /// Sample standard deviation of `A_N` across starting paths.
    pub dispersion: f64,
}

impl ErgodicTrace {
    pub fn n_iter(&self) -> usize {
        self.final_averages
            .first()
            .map_or(0, |_| self.partial_averages[0].len())
    }

    /// Mean over starting paths of `A_n`, `n = 1..N`.
    pub fn mean_curve(&self) -> Vec<f64> {
        let m = self.partial_averages.len() as f64;
        let mut out = vec![0.0; self.n_iter()];
        for row in &self.partial_averages {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a;
            }
        }
        out.iter_mut().for_each(|o| *o /= m);
        out
    }
}

/// Partial Birkhoff averages of `f` along the orbit of `w0`; level `i` of
/// the family draws from `aux.substream(i)`.
pub fn birkhoff_orbit(
    f: &(dyn Fn(&DiscretePath) -> f64 + Sync),
    family: &RotorFamily,
    w0: &DiscretePath,
    aux: RngStream,
    n_iter: usize,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n_iter);
    let mut w = w0.clone();
    let mut acc = 0.0;
    for i in 1..=n_iter {
        let action = family.level(aux, i)?.action_at(&w)?;
        w = transform_with(&action, &w)?;
        let v = f(&w);
        if !v.is_finite() {
            return Err(Error::NonFinite("birkhoff_trace functional"));
        }
        acc += v;
        out.push(acc / i as f64);
    }
    Ok(out)
}

/// Birkhoff traces from `n_starts` independent Brownian starting paths.
pub fn birkhoff_trace(
    f: &(dyn Fn(&DiscretePath) -> f64 + Sync),
    family: &RotorFamily,
    grid: &TimeGrid,
    dim: usize,
    n_starts: usize,
    n_iter: usize,
    plan: StreamPlan,
) -> Result<ErgodicTrace> {
    require_samples(MIN_STARTS, n_starts)?;
    if n_iter == 0 {
        return Err(Error::InvalidArgument("n_iter must be positive".into()));
    }
    let partial_averages = par_collect(n_starts, |p| {
        let w0 = sample_brownian(grid, dim, plan.path(p))?;
        birkhoff_orbit(f, family, &w0, plan.aux(p), n_iter)
    })?;
    let final_averages: Vec<f64> = partial_averages.iter().map(|r| r[n_iter - 1]).collect();
    let mean_final = final_averages.iter().sum::<f64>() / n_starts as f64;
    let dispersion = sample_sd(&final_averages);
    Ok(ErgodicTrace {
        partial_averages,
        final_averages,
        mean_final,
        dispersion,
    })
}

/// For each of `n_starts` Brownian starting paths, the largest relative
/// change `max_i |F(T^i w) − F(w)| / max(|F(w)|, 1e-300)` along `n_iter`
/// iterations. A functional invariant under `T` gives values at rounding level.
pub fn invariant_drift(
    f: &(dyn Fn(&DiscretePath) -> f64 + Sync),
    family: &RotorFamily,
    grid: &TimeGrid,
    dim: usize,
    n_starts: usize,
    n_iter: usize,
    plan: StreamPlan,
) -> Result<Vec<f64>> {
    par_collect(n_starts, |p| {
        let mut w = sample_brownian(grid, dim, plan.path(p))?;
        let f0 = f(&w);
        if !f0.is_finite() {
            return Err(Error::NonFinite("invariant_drift functional"));
        }
        let aux = plan.aux(p);
        let mut drift = 0.0_f64;
        for i in 1..=n_iter {
            let action = family.level(aux, i)?.action_at(&w)?;
            w = transform_with(&action, &w)?;
            drift = drift.max((f(&w) - f0).abs());
        }
        Ok(drift / f0.abs().max(1e-300))
    })
}
