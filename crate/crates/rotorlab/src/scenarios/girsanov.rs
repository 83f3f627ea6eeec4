use std::f64::consts::TAU;
use std::sync::Arc;

use rotorlab_core::ergostat::{girsanov_check, CosineFamily, StreamPlan};
use rotorlab_core::{indicator_vector, CMVector, Rotor, RotorFamily, SpectralResolution};

use super::{grid, setup_stream, unit_h, Ctx, Run, RunResult};
use crate::config::{RotorChoice, ScenarioConfig};
use crate::output::{Table, TestResult};
use crate::row;

/// Deterministic rotor: spectral with phase `θ` on random planes when the
/// dimension is even, `−I` otherwise.
fn deterministic_rotor(cfg: &ScenarioConfig) -> RunResult<Rotor> {
    let g = grid(cfg)?;
    let n = cfg.n_steps * cfg.dim;
    if !n.is_multiple_of(2) {
        let mut m = vec![0.0; cfg.dim * cfg.dim];
        for c in 0..cfg.dim {
            m[c * cfg.dim + c] = -1.0;
        }
        return Rotor::constant_matrix(cfg.dim, m).ctx("building the fixed rotor");
    }
    let planes = n / 2;
    let thetas: Vec<f64> = (0..planes).map(|j| TAU * (j as f64 + 0.5) / planes as f64).collect();
    let res = SpectralResolution::random_planes(g, cfg.dim, &thetas, setup_stream(cfg, 2))
        .ctx("building the fixed resolution")?;
    Rotor::spectral(Arc::new(res)).ctx("building the fixed rotor")
}

/// `E[F(w + Q_n h) exp(−δ(Q_n h) − |h|²/2)] = E[F]` for bounded cosine `F`.
pub(super) fn run(cfg: &ScenarioConfig, run: &mut Run) -> RunResult<()> {
    let g = grid(cfg)?;
    let d = cfg.dim;
    let h = unit_h(g, d)?;
    let k2 = indicator_vector(&g, d, 0.0, 0.5, 0)
        .ctx("building the test direction")?
        .scaled(1.5);
    let k3 = CMVector::from_fn(g, d, |i, c| if c == 0 { (TAU * g.time(i)).sin() } else { 0.0 })
        .ctx("building the test direction")?;
    let test = CosineFamily::new(vec![(0.5, h.clone()), (0.3, k2), (0.2, k3)])
        .ctx("building the test functional")?;

    let mut rotors = Vec::new();
    if cfg.rotor.includes(RotorChoice::Fixed) {
        rotors.push(("fixed", RotorFamily::Fixed(deterministic_rotor(cfg)?)));
    }
    if cfg.rotor.includes(RotorChoice::Sign) {
        rotors.push(("sign", RotorFamily::Sign { grid: g }));
    }
    let mut table = Table::new(
        "girsanov",
        &["rotor", "levels", "lhs", "lhs_std_error", "rhs", "rhs_mc", "rhs_mc_std_error", "gap", "band", "saturated"],
    );
    for (name, family) in rotors {
        let rep = run.timed(name, || {
            girsanov_check(&family, cfg.n_max, &h, &test, cfg.paths, StreamPlan::new(cfg.seed))
                .ctx("checking the change of variables")
        })?;
        table.push(row![
            name,
            rep.n_levels,
            rep.lhs.mean,
            rep.lhs.std_error,
            rep.rhs,
            rep.rhs_mc.mean,
            rep.rhs_mc.std_error,
            rep.gap,
            rep.band,
            rep.saturated
        ]);
        run.test(TestResult::below(&format!("{name}_gap"), rep.gap.abs(), 0.0, rep.band));
        run.test(TestResult::within(&format!("{name}_saturation"), rep.saturated as f64, 0.0, 0.0));
    }
    run.table(table);
    Ok(())
}
