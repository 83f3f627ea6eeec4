use rotorlab_core::ergostat::{
    gaussianity_report, rotated_integral_samples, MomentThresholds, StreamPlan,
};
use rotorlab_core::RotorFamily;

use super::{adapted_rotor, grid, unit_h, Ctx, Run, RunResult};
use crate::config::{RotorChoice, ScenarioConfig};
use crate::output::{Table, TestResult};
use crate::row;

fn check(name: String, value: f64, band: (f64, f64), pass: bool) -> TestResult {
    TestResult {
        name,
        value,
        band,
        pass,
    }
}

/// Law of `δ(R h)` for one rotor per family, `|h| = 1`.
pub(super) fn run(cfg: &ScenarioConfig, run: &mut Run) -> RunResult<()> {
    let g = grid(cfg)?;
    let t = &cfg.thresholds;
    let thresholds = MomentThresholds {
        variance_rel: t.var_tol,
        mean_sigmas: t.mean_sigmas,
        skewness: t.skew_tol,
        excess_kurtosis: t.kurt_tol,
        ks_factor: t.ks_factor,
    };
    let mut rotors = Vec::new();
    if cfg.rotor.includes(RotorChoice::Sign) {
        rotors.push(("sign", cfg.dim, RotorFamily::Sign { grid: g }));
    }
    if cfg.rotor.includes(RotorChoice::Adapted) {
        let d = cfg.dim.max(2);
        rotors.push(("adapted", d, RotorFamily::Fixed(adapted_rotor(d, cfg.rotation_rate)?)));
    }

    let mut table = Table::new(
        "gauss_law_moments",
        &["rotor", "dim", "samples", "mean", "variance", "skewness", "excess_kurtosis", "ks_distance"],
    );
    for (name, dim, family) in rotors {
        let h = unit_h(g, dim)?;
        let rep = run.timed(name, || {
            let xs = rotated_integral_samples(&family, &h, cfg.paths, StreamPlan::new(cfg.seed))
                .ctx("sampling the rotated Wiener integral")?;
            gaussianity_report(&xs, h.norm_sq(), &thresholds).ctx("computing moments")
        })?;
        table.push(row![
            name,
            dim,
            rep.sample_count,
            rep.mean,
            rep.variance,
            rep.skewness,
            rep.excess_kurtosis,
            rep.ks_distance
        ]);
        run.test(check(format!("{name}_variance"), rep.variance, rep.variance_band, rep.variance_pass));
        run.test(check(format!("{name}_mean"), rep.mean.abs(), (0.0, rep.mean_bound), rep.mean_pass));
        run.test(check(
            format!("{name}_skewness"),
            rep.skewness.abs(),
            (0.0, rep.skewness_bound),
            rep.skewness_pass,
        ));
        run.test(check(
            format!("{name}_kurtosis"),
            rep.excess_kurtosis.abs(),
            (0.0, rep.kurtosis_bound),
            rep.kurtosis_pass,
        ));
        run.test(check(format!("{name}_ks"), rep.ks_distance, (0.0, rep.ks_bound), rep.ks_pass));
    }
    run.table(table);
    Ok(())
}
