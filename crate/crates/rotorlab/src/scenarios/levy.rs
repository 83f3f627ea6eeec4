use rotorlab_core::ergostat::{levy_check, transformed_paths, LevyThresholds, StreamPlan};
use rotorlab_core::RotorFamily;

use super::{adapted_rotor, fixed_rotor, grid, Ctx, Run, RunResult};
use crate::config::{RotorChoice, ScenarioConfig};
use crate::output::{Table, TestResult};
use crate::row;

/// Increments of `T w` against those of a Brownian motion.
pub(super) fn run(cfg: &ScenarioConfig, run: &mut Run) -> RunResult<()> {
    let g = grid(cfg)?;
    let thresholds = LevyThresholds {
        variance_rel: cfg.thresholds.levy_var_tol,
        corr_sigmas: cfg.thresholds.corr_sigmas,
    };
    let mut rotors = Vec::new();
    if cfg.rotor.includes(RotorChoice::Sign) {
        rotors.push(("sign", cfg.dim, RotorFamily::Sign { grid: g }));
    }
    if cfg.rotor.includes(RotorChoice::Adapted) {
        let d = cfg.dim.max(2);
        rotors.push(("adapted", d, RotorFamily::Fixed(adapted_rotor(d, cfg.rotation_rate)?)));
    }
    if cfg.rotor.includes(RotorChoice::Fixed) {
        rotors.push(("fixed", cfg.dim, RotorFamily::Fixed(fixed_rotor(cfg, cfg.dim)?)));
    }

    let mut ratios = Table::new("levy_variance", &["rotor", "step", "coord", "variance_ratio"]);
    let mut summary = Table::new(
        "levy_summary",
        &["rotor", "dim", "paths", "max_variance_deviation", "max_abs_correlation", "max_coordinate_correlation", "correlation_bound"],
    );
    for (name, dim, family) in rotors {
        let rep = run.timed(name, || {
            let paths = transformed_paths(&family, &g, dim, cfg.paths, StreamPlan::new(cfg.seed))
                .ctx("transforming Brownian paths")?;
            levy_check(&paths, &thresholds).ctx("checking increments")
        })?;
        for (k, r) in rep.variance_ratios.iter().enumerate() {
            ratios.push(row![name, k / dim, k % dim, *r]);
        }
        summary.push(row![
            name,
            dim,
            rep.n_paths,
            rep.max_variance_deviation,
            rep.max_abs_correlation,
            rep.max_coordinate_correlation,
            rep.correlation_bound
        ]);
        run.test(TestResult {
            name: format!("{name}_variance"),
            value: rep.max_variance_deviation,
            band: (0.0, thresholds.variance_rel),
            pass: rep.variance_pass,
        });
        run.test(TestResult {
            name: format!("{name}_correlation"),
            value: rep.max_abs_correlation,
            band: (0.0, rep.correlation_bound),
            pass: rep.correlation_pass,
        });
    }
    run.table(ratios);
    run.table(summary);
    Ok(())
}
