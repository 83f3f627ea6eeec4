use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::Arc;

use rotorlab_core::chaos::{spectral_ergodicity_check, ErgodicityVerdict, Verdict};
use rotorlab_core::ergostat::{birkhoff_trace, invariant_drift, ErgodicTrace, StreamPlan};
use rotorlab_core::{
    wiener_integral, CMVector, DiscretePath, PhaseLaw, Rotor, RotorFamily, SpectralResolution,
};

use super::{grid, unit_h, Ctx, Run, RunResult};
use crate::config::{LawChoice, ScenarioConfig};
use crate::output::{Table, TestResult};
use crate::row;

const ETA_GRID: usize = 256;
/// Median relative drift of the witness that marks it as not invariant.
const DRIFT_MIN: f64 = 0.1;
const INVARIANT_TOL: f64 = 1e-9;

struct Regime {
    name: &'static str,
    resolution: Arc<SpectralResolution>,
    law: PhaseLaw,
}

impl Regime {
    fn family(&self) -> RotorFamily {
        RotorFamily::IidPhase {
            resolution: self.resolution.clone(),
            law: self.law.clone(),
        }
    }
}

/// The ergodic regime (i.i.d. phases over `n_blocks` distinct angles), a
/// constant phase on the same resolution, and a single spectral point.
fn regimes(cfg: &ScenarioConfig) -> RunResult<Vec<Regime>> {
    let g = grid(cfg)?;
    let planes = cfg.n_steps * cfg.dim / 2;
    let per = planes / cfg.n_blocks;
    let thetas: Vec<f64> = (0..planes)
        .map(|j| TAU * (j / per) as f64 / cfg.n_blocks as f64)
        .collect();
    let spread = Arc::new(
        SpectralResolution::cell_planes(g, cfg.dim, &thetas).ctx("building the resolution")?,
    );
    let single = Arc::new(
        SpectralResolution::cell_planes(g, cfg.dim, &vec![0.0; planes])
            .ctx("building the single-point resolution")?,
    );
    let law = match cfg.phase_law {
        LawChoice::Uniform => PhaseLaw::uniform(),
        LawChoice::TwoPoint => PhaseLaw::TwoPoint {
            first: 0.0,
            second: PI,
            p_first: 0.5,
        },
    };
    Ok(vec![
        Regime {
            name: "ergodic",
            resolution: spread.clone(),
            law: law.clone(),
        },
        Regime {
            name: "constant_phase",
            resolution: spread,
            law: PhaseLaw::Constant(cfg.phase_value),
        },
        Regime {
            name: "single_atom",
            resolution: single,
            law,
        },
    ])
}

fn verdicts(
    cfg: &ScenarioConfig,
    regimes: &[Regime],
    h: &CMVector,
) -> RunResult<Vec<ErgodicityVerdict>> {
    regimes
        .iter()
        .map(|r| {
            spectral_ergodicity_check(&r.resolution, &r.law, h, ETA_GRID, cfg.thresholds.atom_threshold)
                .ctx("checking the spectral criteria")
        })
        .collect()
}

fn verdict_table(regimes: &[Regime], v: &[ErgodicityVerdict]) -> Table {
    let mut t = Table::new(
        "verdicts",
        &["regime", "max_atom", "condition1", "worst_modulus", "condition2", "verdict"],
    );
    for (r, v) in regimes.iter().zip(v) {
        t.push(row![
            r.name,
            v.condition1_max_atom,
            v.condition1_holds,
            v.condition2_worst_modulus,
            v.condition2_holds,
            v.verdict.as_str()
        ]);
    }
    t
}

fn traces(cfg: &ScenarioConfig, run: &mut Run, regimes: &[Regime], h: &CMVector) -> RunResult<Vec<ErgodicTrace>> {
    let g = grid(cfg)?;
    let hh = h.clone();
    let f = move |w: &DiscretePath| wiener_integral(&hh, w).map_or(f64::NAN, f64::cos);
    regimes
        .iter()
        .map(|r| {
            run.timed(&format!("birkhoff_{}", r.name), || {
                birkhoff_trace(&f, &r.family(), &g, cfg.dim, cfg.paths, cfg.n_iter, StreamPlan::new(cfg.seed))
                    .ctx("computing Birkhoff averages")
            })
        })
        .collect()
}

fn ratio_tests(cfg: &ScenarioConfig, run: &mut Run, tr: &[ErgodicTrace]) {
    let base = tr[0].dispersion;
    for (name, t) in [("constant_phase_ratio", &tr[1]), ("single_atom_ratio", &tr[2])] {
        run.test(TestResult::within(name, t.dispersion / base, cfg.thresholds.ratio_min, f64::INFINITY));
    }
}

fn final_table(regimes: &[Regime], tr: &[ErgodicTrace]) -> Table {
    let mut header = vec!["start"];
    header.extend(regimes.iter().map(|r| r.name));
    let mut t = Table::new("birkhoff_final", &header);
    for p in 0..tr[0].final_averages.len() {
        let mut r = row![p];
        r.extend(tr.iter().map(|x| crate::output::fmt_real(x.final_averages[p])));
        t.push(r);
    }
    t
}

/// Birkhoff averages of `cos δh` in ergodic and non-ergodic regimes.
pub(super) fn run_dichotomy(cfg: &ScenarioConfig, run: &mut Run) -> RunResult<()> {
    let regimes = regimes(cfg)?;
    let h = unit_h(grid(cfg)?, cfg.dim)?;
    let tr = traces(cfg, run, &regimes, &h)?;
    let v = verdicts(cfg, &regimes, &h)?;

    let target = (-0.5 * h.norm_sq()).exp();
    let e = &tr[0];
    run.test(TestResult::within("ergodic_mean", (e.mean_final - target).abs(), 0.0, cfg.thresholds.mean_tol));
    run.test(TestResult::below("ergodic_dispersion", e.dispersion, 0.0, cfg.thresholds.disp_tol));
    ratio_tests(cfg, run, &tr);
    run.test(TestResult::flag("verdict_ergodic", v[0].verdict == Verdict::Ergodic));
    run.test(TestResult::flag("verdict_constant_phase", v[1].verdict == Verdict::NonErgodic));
    run.test(TestResult::flag("verdict_single_atom", v[2].verdict == Verdict::NonErgodic));

    let mut header = vec!["n"];
    header.extend(regimes.iter().map(|r| r.name));
    let mut curve = Table::new("birkhoff_curve", &header);
    let curves: Vec<Vec<f64>> = tr.iter().map(|t| t.mean_curve()).collect();
    for n in 0..cfg.n_iter {
        let mut r = row![n + 1];
        r.extend(curves.iter().map(|c| crate::output::fmt_real(c[n])));
        curve.push(r);
    }
    let mut summary = Table::new("birkhoff_summary", &["regime", "mean_final", "dispersion", "target"]);
    for (r, t) in regimes.iter().zip(&tr) {
        summary.push(row![r.name, t.mean_final, t.dispersion, target]);
    }
    run.table(curve);
    run.table(final_table(&regimes, &tr));
    run.table(summary);
    run.table(verdict_table(&regimes, &v));
    Ok(())
}

/// Each non-ergodic regime has a non-constant invariant functional; the
/// ergodic one does not leave it fixed.
pub(super) fn run_necessary(cfg: &ScenarioConfig, run: &mut Run) -> RunResult<()> {
    let g = grid(cfg)?;
    let regimes = regimes(cfg)?;
    let h = unit_h(g, cfg.dim)?;
    // J h: quarter turn in every plane
    let quarter = Rotor::spectral_with_phase_fn(regimes[0].resolution.clone(), |_| FRAC_PI_2)
        .ctx("building the quarter-turn rotor")?;
    let jh = quarter
        .action_at(&DiscretePath::zeros(g, cfg.dim).ctx("building a path")?)
        .ctx("resolving the quarter turn")?
        .apply(&h)
        .ctx("applying the quarter turn")?;
    let (h1, h2) = (h.clone(), jh);
    let witness = move |w: &DiscretePath| {
        let a = wiener_integral(&h1, w).unwrap_or(f64::NAN);
        let b = wiener_integral(&h2, w).unwrap_or(f64::NAN);
        a * a + b * b
    };

    let mut drifts = Vec::new();
    for r in &regimes {
        let d = run.timed(&format!("witness_{}", r.name), || {
            invariant_drift(&witness, &r.family(), &g, cfg.dim, cfg.paths, cfg.n_iter, StreamPlan::new(cfg.seed))
                .ctx("following the invariant witness")
        })?;
        drifts.push(d);
    }
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let mut sorted = drifts[0].clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    run.test(TestResult::below("constant_phase_invariant", max(&drifts[1]), 0.0, INVARIANT_TOL));
    run.test(TestResult::below("single_atom_invariant", max(&drifts[2]), 0.0, INVARIANT_TOL));
    run.test(TestResult::within("ergodic_witness_moves", median, DRIFT_MIN, f64::INFINITY));

    let v = verdicts(cfg, &regimes, &h)?;
    run.test(TestResult::flag("ergodic_conditions_hold", v[0].condition1_holds && v[0].condition2_holds));
    run.test(TestResult::flag("constant_phase_condition2_fails", !v[1].condition2_holds));
    run.test(TestResult::flag("single_atom_condition1_fails", !v[2].condition1_holds));

    let tr = traces(cfg, run, &regimes, &h)?;
    ratio_tests(cfg, run, &tr);

    let mut header = vec!["start"];
    header.extend(regimes.iter().map(|r| r.name));
    let mut dt = Table::new("witness_drift", &header);
    for p in 0..cfg.paths {
        let mut r = row![p];
        r.extend(drifts.iter().map(|d| crate::output::fmt_real(d[p])));
        dt.push(r);
    }
    run.table(dt);
    run.table(final_table(&regimes, &tr));
    run.table(verdict_table(&regimes, &v));
    Ok(())
}
