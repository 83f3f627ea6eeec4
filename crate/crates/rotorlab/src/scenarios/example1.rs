use rotorlab_core::ergostat::{example1_decay, sign_correlation_mc, sign_two_point, StreamPlan};

use super::{grid, Ctx, Run, RunResult};
use crate::config::ScenarioConfig;
use crate::output::{Table, TestResult};
use crate::row;

/// Decay level for `|A_{s,t}^{n_max}|` at `s ≠ t`.
const DECAY_TOL: f64 = 0.1;

/// Powers of the two-point function `E[sign b_s sign b_t]` at distinct grid
/// times, with a Monte Carlo check of the closed form.
pub(super) fn run(cfg: &ScenarioConfig, run: &mut Run) -> RunResult<()> {
    let g = grid(cfg)?;
    let n = g.n_steps();
    let pairs: Vec<(f64, f64)> = (1..n)
        .flat_map(|i| (i + 1..n).map(move |j| (g.time(i), g.time(j))))
        .collect();
    let curve = run.timed("powers", || {
        example1_decay(&sign_two_point, &[1.0], &[1.0], &pairs, cfg.n_max, DECAY_TOL)
            .ctx("computing powers of the two-point function")
    })?;
    let (mean, se) = run.timed("monte_carlo", || {
        sign_correlation_mc(&g, cfg.paths, StreamPlan::new(cfg.seed))
            .ctx("estimating sign correlations")
    })?;

    let last = curve
        .rows
        .iter()
        .filter(|r| r.n == cfg.n_max)
        .map(|r| r.value.abs())
        .fold(0.0, f64::max);
    run.test(TestResult::flag("envelope", curve.envelope_ok));
    run.test(TestResult::within("off_diagonal_decay", last, 0.0, DECAY_TOL));

    let mut mc = Table::new("example1_mc", &["s", "t", "analytic", "estimate", "std_error", "z"]);
    let mut worst = 0.0_f64;
    for i in 1..n {
        for j in i + 1..n {
            let a = sign_two_point(g.time(i), g.time(j))[(0, 0)];
            let k = i * n + j;
            let z = (mean[k] - a).abs() / se[k];
            worst = worst.max(z);
            mc.push(row![g.time(i), g.time(j), a, mean[k], se[k], z]);
        }
    }
    run.test(TestResult::within("two_point_mc", worst, 0.0, cfg.thresholds.mc_sigmas));

    let mut t = Table::new("example1_curve", &["s", "t", "n", "value", "envelope"]);
    for r in &curve.rows {
        t.push(row![r.s, r.t, r.n, r.value, r.envelope]);
    }
    run.table(t);
    run.table(mc);
    Ok(())
}
