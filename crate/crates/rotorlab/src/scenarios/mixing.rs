use rotorlab_core::ergostat::{qn_decay, sign_two_point, wick_mixing_curve, StreamPlan};
use rotorlab_core::RotorFamily;

use super::{grid, unit_h, Ctx, Run, RunResult};
use crate::config::ScenarioConfig;
use crate::output::{Table, TestResult};
use crate::row;

/// Band for the second moment of `(Q_1 h, h)` when `|h| = 1`.
const Q1_TARGET: f64 = 0.5;
const Q1_TOL: f64 = 0.01;
/// Exceedance level as a fraction of `|h|²`.
const EPS_FRACTION: f64 = 0.1;

/// Decay of `(Q_n h, h)` and the Wick-exponential mixing curve for the
/// sign rotor family.
pub(super) fn run(cfg: &ScenarioConfig, run: &mut Run) -> RunResult<()> {
    let g = grid(cfg)?;
    let h = unit_h(g, cfg.dim)?;
    let family = RotorFamily::Sign { grid: g };
    let plan = StreamPlan::new(cfg.seed);
    let sigmas = cfg.thresholds.mc_sigmas;

    let decay = run.timed("qn_decay", || {
        qn_decay(&family, &h, &h, cfg.n_max, cfg.paths, EPS_FRACTION * h.norm_sq(), plan)
            .ctx("estimating the decay of (Q_n h, h)")
    })?;
    let wick = run.timed("wick_mixing", || {
        wick_mixing_curve(&family, &h, &h, cfg.n_max, cfg.paths, plan)
            .ctx("estimating the Wick mixing curve")
    })?;

    // E(Q_1 h, h)² = Σ_ij |ḣ_i|² |ḣ_j|² E[sign b(s_i) sign b(s_j)] dt²
    let dt = g.dt();
    let weights: Vec<f64> = h
        .density()
        .chunks(cfg.dim)
        .map(|c| c.iter().map(|x| x * x).sum::<f64>() * dt)
        .collect();
    let mut analytic = 0.0;
    for (i, wi) in weights.iter().enumerate() {
        for (j, wj) in weights.iter().enumerate() {
            analytic += wi * wj * sign_two_point(g.time(i), g.time(j))[(0, 0)];
        }
    }

    let q1 = &decay.rows[0];
    run.test(TestResult::within("q1_second_moment", q1.second_moment, Q1_TARGET - Q1_TOL, Q1_TARGET + Q1_TOL));
    run.test(TestResult::within(
        "q1_vs_arcsine",
        (q1.second_moment - analytic).abs() / q1.second_moment_std_error,
        0.0,
        sigmas,
    ));
    run.test(TestResult::flag("second_moment_decreasing", decay.strictly_decreasing));
    run.test(TestResult::flag("cauchy_schwarz", decay.cauchy_schwarz_ok));
    run.test(TestResult::flag("exceedance_monotone_tail", decay.monotone_tail));

    let last = wick.rows.last().expect("n_max + 1 rows");
    run.test(TestResult::within("wick_limit_one", (last.estimate - 1.0).abs() / last.std_error, 0.0, sigmas));
    let paired = wick
        .rows
        .iter()
        .filter(|r| r.difference_std_error > 0.0)
        .map(|r| r.difference.abs() / r.difference_std_error)
        .fold(0.0, f64::max);
    run.test(TestResult::within("wick_paired_reference", paired, 0.0, sigmas));
    let saturated: usize = wick.rows.iter().map(|r| r.saturated).sum();
    run.test(TestResult::within("wick_saturation", saturated as f64, 0.0, 0.0));

    let mut dtab = Table::new(
        "decay_curve",
        &["n", "mean", "second_moment", "second_moment_std_error", "exceedance", "analytic_q1"],
    );
    for r in &decay.rows {
        let a = if r.n == 1 { analytic } else { f64::NAN };
        dtab.push(row![r.n, r.mean, r.second_moment, r.second_moment_std_error, r.exceedance, a]);
    }
    let mut wtab = Table::new(
        "wick_mixing",
        &["n", "estimate", "std_error", "reference", "reference_std_error", "difference", "difference_std_error", "saturated"],
    );
    for r in &wick.rows {
        wtab.push(row![
            r.n,
            r.estimate,
            r.std_error,
            r.reference,
            r.reference_std_error,
            r.difference,
            r.difference_std_error,
            r.saturated
        ]);
    }
    let mut flags = Table::new("decay_flags", &["eps", "max_cauchy_schwarz_excess", "converged"]);
    flags.push(row![decay.eps, decay.max_cauchy_schwarz_excess, decay.converged]);
    run.table(dtab);
    run.table(wtab);
    run.table(flags);
    Ok(())
}
