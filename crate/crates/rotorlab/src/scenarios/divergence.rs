use std::f64::consts::PI;
use std::sync::Arc;

use rotorlab_core::chaos::{multiple_integral_2, SymmetricKernel2};
use rotorlab_core::ergostat::StreamPlan;
use rotorlab_core::malliavin::{
    ogawa_integral, skorohod, transform, transform_by_expansion, FdConfig, HValuedMap,
    OrthonormalBasis,
};
use rotorlab_core::rotors::SpectralBlock;
use rotorlab_core::{
    cm_inner, sample_brownian, wiener_integral, CMVector, DiscretePath, Rotor, RngStream,
    SpectralResolution, TimeGrid,
};

use super::{adapted_rotor, fixed_rotor, grid, setup_stream, Ctx, Run, RunResult};
use crate::config::{RotorChoice, ScenarioConfig};
use crate::output::{Table, TestResult};
use crate::row;

const IDENTITY_TOL: f64 = 1e-10;
const DIVERGENCE_TOL: f64 = 1e-8;
const DECOMPOSITION_TOL: f64 = 1e-6;
const EXPANSION_TOL: f64 = 1e-6;
const CHAOS_TOL: f64 = 1e-9;
const EXPANSION_PATHS: usize = 100;

fn random_vector(g: TimeGrid, dim: usize, stream: RngStream) -> RunResult<CMVector> {
    let mut rng = stream.rng();
    let c: Vec<f64> = (0..g.n_steps() * dim).map(|_| rng.standard_normal()).collect();
    CMVector::from_coefficients(g, dim, &c).ctx("drawing a random direction")
}

/// Smooth adapted field: cell `i`, coordinate `c` is `cos(W^c(s_i) + c)`.
fn adapted_field(dim: usize) -> HValuedMap {
    HValuedMap::adapted(move |w: &DiscretePath| {
        let g = *w.grid();
        let mut pos = vec![0.0; dim];
        let mut density = Vec::with_capacity(g.n_steps() * dim);
        for i in 0..g.n_steps() {
            for (c, p) in pos.iter().enumerate() {
                density.push((p + c as f64).cos());
            }
            for (c, p) in pos.iter_mut().enumerate() {
                *p += w.increment(i, c);
            }
        }
        CMVector::new(g, dim, density)
    })
}

/// `u(w) = R(w) v(T w)`.
fn pulled_back(r: &Rotor, v: &HValuedMap) -> HValuedMap {
    let (r, v) = (r.clone(), v.clone());
    HValuedMap::new(move |w| {
        let tw = transform(&r, w)?;
        r.action_at(w)?.apply(&v.eval(&tw)?)
    })
}

/// Resolution with `e_0` alone at angle π, the remaining indicator vectors at
/// angle 0 or in planes with angles in (π, 2π).
fn pi_block_resolution(g: TimeGrid, dim: usize) -> RunResult<SpectralResolution> {
    let n = g.n_steps() * dim;
    let e = |j| CMVector::basis_vector(g, dim, j);
    let mut blocks = Vec::new();
    let first_plane = if n.is_multiple_of(2) { 2 } else { 3 };
    for j in 1..first_plane {
        blocks.push(SpectralBlock {
            theta: 0.0,
            basis: vec![e(j).ctx("building the resolution")?],
        });
    }
    blocks.push(SpectralBlock {
        theta: PI,
        basis: vec![e(0).ctx("building the resolution")?],
    });
    let planes = (n - first_plane) / 2;
    for j in 0..planes {
        let a = first_plane + 2 * j;
        blocks.push(SpectralBlock {
            theta: PI + PI * (j + 1) as f64 / (planes + 1) as f64,
            basis: vec![
                e(a).ctx("building the resolution")?,
                e(a + 1).ctx("building the resolution")?,
            ],
        });
    }
    SpectralResolution::new(g, dim, blocks).ctx("building the resolution")
}

fn max_abs_diff(a: &DiscretePath, b: &DiscretePath) -> f64 {
    a.increments()
        .iter()
        .zip(b.increments())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Divergence identities along the transformation and chaos invariance on
/// a spectral block at angle π.
pub(super) fn run(cfg: &ScenarioConfig, run: &mut Run) -> RunResult<()> {
    let g = grid(cfg)?;
    let d = cfg.dim;
    let (label, r) = if cfg.rotor.includes(RotorChoice::Adapted) {
        ("adapted", adapted_rotor(d, cfg.rotation_rate)?)
    } else {
        ("fixed", fixed_rotor(cfg, d)?)
    };
    let fd = FdConfig::new(cfg.thresholds.fd_step).ctx("configuring finite differences")?;
    let random_basis =
        OrthonormalBasis::random(g, d, setup_stream(cfg, 1)).ctx("drawing a random basis")?;
    let indicator = OrthonormalBasis::indicator(g, d).ctx("building the indicator basis")?;
    let plan = StreamPlan::new(cfg.seed);
    let v_adapted = adapted_field(d);

    let pi_res = Arc::new(pi_block_resolution(g, d)?);
    let pi_rotor = Rotor::spectral(pi_res).ctx("building the spectral rotor")?;
    let u0 = CMVector::basis_vector(g, d, 0).ctx("building e_0")?;
    let kernel = SymmetricKernel2::from_outer(&u0, &u0).ctx("building the kernel")?;

    let mut errors = Table::new(
        "divergence_errors",
        &["path", "rotation", "rotated_ogawa", "pullback_constant", "pullback_adapted", "ogawa_decomposition", "chaos_first", "chaos_second"],
    );
    let mut worst = [0.0_f64; 7];
    run.timed("identities", || {
        for p in 0..cfg.paths {
            let w = sample_brownian(&g, d, plan.path(p)).ctx("sampling a path")?;
            let aux = plan.aux(p);
            let h = random_vector(g, d, aux.substream(1))?;
            let k = random_vector(g, d, aux.substream(2))?;
            let tw = transform(&r, &w).ctx("transforming the path")?;
            let rh = r.action_at(&w).ctx("resolving the rotor")?.apply(&h).ctx("applying the rotor")?;

            let rotation = (wiener_integral(&h, &tw).ctx("integrating along T w")?
                - wiener_integral(&rh, &w).ctx("integrating R h")?)
            .abs();

            let u = HValuedMap::rotated(r.clone(), h.clone());
            let rotated_ogawa = (ogawa_integral(&u, &w, &indicator).ctx("Ogawa sum in the indicator basis")?
                - skorohod(&u, &w, &random_basis, &fd).ctx("Skorohod integral of R h")?)
            .abs();

            let mut pullback = [0.0; 2];
            for (slot, v) in [HValuedMap::constant(k.clone()), v_adapted.clone()].iter().enumerate() {
                let lhs = skorohod(v, &tw, &random_basis, &fd).ctx("Skorohod integral at T w")?;
                let rhs = skorohod(&pulled_back(&r, v), &w, &random_basis, &fd)
                    .ctx("Skorohod integral of the pulled-back field")?;
                pullback[slot] = (lhs - rhs).abs();
            }

            let dh = wiener_integral(&h, &w).ctx("integrating h")?;
            let dk = wiener_integral(&k, &w).ctx("integrating k")?;
            let hk = cm_inner(&h, &k).ctx("inner product")?;
            let uk = HValuedMap::scalar_times(k.clone(), h.clone());
            let decomposition = (skorohod(&uk, &w, &random_basis, &fd)
                .ctx("Skorohod integral of δk · h")?
                - (dk * dh - hk))
                .abs();

            let pw = transform(&pi_rotor, &w).ctx("spectral transform")?;
            let chaos_first = (wiener_integral(&u0, &pw).ctx("first chaos")?
                + wiener_integral(&u0, &w).ctx("first chaos")?)
            .abs();
            let chaos_second = (multiple_integral_2(&kernel, &pw).ctx("second chaos")?
                - multiple_integral_2(&kernel, &w).ctx("second chaos")?)
            .abs();

            let errs = [rotation, rotated_ogawa, pullback[0], pullback[1], decomposition, chaos_first, chaos_second];
            for (w_, e) in worst.iter_mut().zip(errs) {
                *w_ = w_.max(e);
            }
            errors.push(row![p, errs[0], errs[1], errs[2], errs[3], errs[4], errs[5], errs[6]]);
        }
        Ok(())
    })?;

    let mut expansion = 0.0_f64;
    run.timed("expansion", || {
        for p in 0..cfg.paths.min(EXPANSION_PATHS) {
            let w = sample_brownian(&g, d, plan.path(p)).ctx("sampling a path")?;
            let direct = transform(&r, &w).ctx("transforming the path")?;
            let expanded = transform_by_expansion(&r, &w, &random_basis, &fd)
                .ctx("transforming by basis expansion")?;
            expansion = expansion.max(max_abs_diff(&direct, &expanded));
        }
        Ok(())
    })?;

    let names = [
        ("rotation_identity", IDENTITY_TOL),
        ("rotated_ogawa", DIVERGENCE_TOL),
        ("pullback_constant", DIVERGENCE_TOL),
        ("pullback_adapted", DIVERGENCE_TOL),
        ("ogawa_decomposition", DECOMPOSITION_TOL),
        ("chaos_first_order", CHAOS_TOL),
        ("chaos_second_order", CHAOS_TOL),
    ];
    for ((name, tol), value) in names.into_iter().zip(worst) {
        run.test(TestResult::below(name, value, 0.0, tol));
    }
    run.test(TestResult::below("expansion_consistency", expansion, 0.0, EXPANSION_TOL));
    let mut meta = Table::new("divergence_setup", &["rotor", "dim", "paths", "expansion_paths"]);
    meta.push(row![label, d, cfg.paths, cfg.paths.min(EXPANSION_PATHS)]);
    run.table(errors);
    run.table(meta);
    Ok(())
}
