//! Random isometries of the discretized Cameron-Martin space.
//!
//! A [`Rotor`] maps `(w, h)` to `R(w) h`. Path dependence is resolved once per
//! path by [`Rotor::action_at`], which returns the linear operator `R(w)` as a
//! [`RotorAction`]; everything downstream (the transformation `T`, the
//! products `Q_n`, kernel rotation) works with actions.

mod family;
mod spectral;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid_paths::{CMVector, DiscretePath, RngStream, TimeGrid};

pub use family::RotorFamily;
pub use spectral::{
    is_real_phase, random_orthogonal, spectral_measure, wrap_angle, PhaseLaw, SpectralBlock,
    SpectralResolution,
};

/// Orthogonality tolerance for matrices returned by an adapted callback.
pub const ORTHOGONALITY_TOL: f64 = 1e-8;

/// What an adapted callback may read: the increments strictly before the
/// current step and the path position at the left endpoint.
#[derive(Debug, Clone, Copy)]
pub struct PathPrefix<'a> {
    pub grid: &'a TimeGrid,
    pub dim: usize,
    pub step: usize,
    /// Rows `0..step` of the increment matrix.
    pub increments: &'a [f64],
    /// `W(s_step)`.
    pub position: &'a [f64],
}

impl PathPrefix<'_> {
    pub fn time(&self) -> f64 {
        self.grid.time(self.step)
    }
}

/// Callback writing the `dim × dim` orthogonal matrix `σ(s_i, w)` (row-major)
/// into its output slice.
pub type SigmaFn = dyn Fn(&PathPrefix<'_>, &mut [f64]) + Send + Sync;

/// Deterministic or already-resolved spectral rotor `Σ_j e^{iφ_j} p_j`.
#[derive(Clone, Debug)]
pub struct SpectralRotor {
    resolution: Arc<SpectralResolution>,
    phases: Arc<Vec<f64>>,
}

impl SpectralRotor {
    pub fn resolution(&self) -> &SpectralResolution {
        &self.resolution
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }
}

#[derive(Clone)]
pub struct AdaptedMatrix {
    dim: usize,
    sigma: Arc<SigmaFn>,
}

impl fmt::Debug for AdaptedMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AdaptedMatrix").field("dim", &self.dim).finish()
    }
}

/// Multiplication of `ḣ(s_i)` by `sign(b(s_i))` for an auxiliary path `b`.
#[derive(Clone, Debug)]
pub struct SignRotor {
    grid: TimeGrid,
    signs: Arc<Vec<f64>>,
}

impl SignRotor {
    pub fn signs(&self) -> &[f64] {
        &self.signs
    }
}

/// The rotor families. Randomness (phases, auxiliary paths) is already
/// resolved in every variant.
#[derive(Clone, Debug)]
pub enum Rotor {
    Identity,
    Spectral(SpectralRotor),
    AdaptedMatrix(AdaptedMatrix),
    Sign(SignRotor),
}

/// The operator `R(w)` at a fixed path.
#[derive(Clone, Debug)]
pub enum RotorAction {
    Identity,
    Spectral(SpectralRotor),
    /// One `dim × dim` matrix per cell, row-major, concatenated.
    CellMatrices { dim: usize, matrices: Vec<f64> },
    CellSigns(Arc<Vec<f64>>),
}

impl Rotor {
    /// Spectral rotor with phase `φ(θ) = θ` on every block.
    pub fn spectral(resolution: Arc<SpectralResolution>) -> Result<Self> {
        let phases = resolution.thetas();
        Self::spectral_with_phases(resolution, phases)
    }

    /// Spectral rotor with phase assignment `φ` evaluated at each block angle.
    pub fn spectral_with_phase_fn(
        resolution: Arc<SpectralResolution>,
        phase: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let phases = resolution.blocks().iter().map(|b| phase(b.theta)).collect();
        Self::spectral_with_phases(resolution, phases)
    }

    pub fn spectral_with_phases(
        resolution: Arc<SpectralResolution>,
        phases: Vec<f64>,
    ) -> Result<Self> {
        if phases.len() != resolution.n_blocks() {
            return Err(Error::ShapeMismatch(format!(
                "{} phases for {} blocks",
                phases.len(),
                resolution.n_blocks()
            )));
        }
        for (b, &p) in resolution.blocks().iter().zip(&phases) {
            if !p.is_finite() {
                return Err(Error::NonFinite("spectral phase"));
            }
            if b.basis.len() == 1 && !is_real_phase(p) {
                return Err(Error::InvalidPhase { angle: p });
            }
        }
        Ok(Rotor::Spectral(SpectralRotor {
            resolution,
            phases: Arc::new(phases),
        }))
    }

    /// Rotor `(Rh)˙(s_i) = σ(s_i, w) ḣ(s_i)` with an adapted matrix callback.
    pub fn adapted_matrix(
        dim: usize,
        sigma: impl Fn(&PathPrefix<'_>, &mut [f64]) + Send + Sync + 'static,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("matrix dimension must be positive".into()));
        }
        Ok(Rotor::AdaptedMatrix(AdaptedMatrix {
            dim,
            sigma: Arc::new(sigma),
        }))
    }

    /// Constant matrix `σ ≡ m` (row-major).
    pub fn constant_matrix(dim: usize, m: Vec<f64>) -> Result<Self> {
        if m.len() != dim * dim {
            return Err(Error::ShapeMismatch(format!(
                "constant matrix needs {} entries, got {}",
                dim * dim,
                m.len()
            )));
        }
        Self::adapted_matrix(dim, move |_, out| out.copy_from_slice(&m))
    }

    /// Planar (`d = 2`) rotation by a path-dependent angle.
    pub fn planar_rotation(
        angle: impl Fn(&PathPrefix<'_>) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Rotor::AdaptedMatrix(AdaptedMatrix {
            dim: 2,
            sigma: Arc::new(move |p: &PathPrefix<'_>, out: &mut [f64]| {
                let (s, c) = angle(p).sin_cos();
                out.copy_from_slice(&[c, -s, s, c]);
            }),
        })
    }

    /// Whether `R(w)` depends on `w`.
    pub fn is_path_dependent(&self) -> bool {
        matches!(self, Rotor::AdaptedMatrix(_))
    }

    /// Resolves `R(w)` at the path `w`.
    pub fn action_at(&self, w: &DiscretePath) -> Result<RotorAction> {
        match self {
            Rotor::Identity => Ok(RotorAction::Identity),
            Rotor::Spectral(s) => {
                if s.resolution.grid() != w.grid() || s.resolution.dim() != w.dim() {
                    return Err(Error::ShapeMismatch(
                        "spectral rotor and path live on different spaces".into(),
                    ));
                }
                Ok(RotorAction::Spectral(s.clone()))
            }
            Rotor::Sign(s) => {
                if s.grid != *w.grid() {
                    return Err(Error::ShapeMismatch(
                        "sign rotor auxiliary path is on a different grid".into(),
                    ));
                }
                Ok(RotorAction::CellSigns(s.signs.clone()))
            }
            Rotor::AdaptedMatrix(a) => {
                let d = a.dim;
                if w.dim() != d {
                    return Err(Error::ShapeMismatch(format!(
                        "adapted rotor of dimension {d} applied to a path of dimension {}",
                        w.dim()
                    )));
                }
                let n = w.grid().n_steps();
                let mut matrices = vec![0.0; n * d * d];
                let mut position = vec![0.0; d];
                for i in 0..n {
                    let prefix = PathPrefix {
                        grid: w.grid(),
                        dim: d,
                        step: i,
                        increments: &w.increments()[..i * d],
                        position: &position,
                    };
                    let out = &mut matrices[i * d * d..(i + 1) * d * d];
                    (a.sigma)(&prefix, out);
                    let dev = orthogonality_defect(out, d);
                    if !(dev <= ORTHOGONALITY_TOL) {
                        return Err(Error::NotOrthogonal {
                            step: i,
                            deviation: dev,
                        });
                    }
                    for (p, x) in position.iter_mut().zip(w.cell(i)) {
                        *p += x;
                    }
                }
                Ok(RotorAction::CellMatrices { dim: d, matrices })
            }
        }
    }
}

/// `max |σ σᵀ - I|`.
fn orthogonality_defect(m: &[f64], d: usize) -> f64 {
    let mut dev: f64 = 0.0;
    for r in 0..d {
        for c in 0..d {
            let mut s = 0.0;
            for k in 0..d {
                s += m[r * d + k] * m[c * d + k];
            }
            let target = if r == c { 1.0 } else { 0.0 };
            let e = (s - target).abs();
            if e.is_nan() {
                return f64::NAN;
            }
            dev = dev.max(e);
        }
    }
    dev
}

impl RotorAction {
    /// `out = R x` (or `Rᵀ x` when `transpose`) on an `n_steps × dim` array in
    /// any uniform scaling (densities, coefficients or increments).
    pub fn apply_slice(&self, x: &[f64], out: &mut [f64], transpose: bool) {
        match self {
            RotorAction::Identity => out.copy_from_slice(x),
            RotorAction::CellSigns(signs) => {
                let d = x.len() / signs.len();
                for (i, s) in signs.iter().enumerate() {
                    for c in 0..d {
                        out[i * d + c] = s * x[i * d + c];
                    }
                }
            }
            RotorAction::CellMatrices { dim, matrices } => {
                let d = *dim;
                for (i, m) in matrices.chunks_exact(d * d).enumerate() {
                    let xi = &x[i * d..(i + 1) * d];
                    for r in 0..d {
                        let mut s = 0.0;
                        for k in 0..d {
                            let e = if transpose { m[k * d + r] } else { m[r * d + k] };
                            s += e * xi[k];
                        }
                        out[i * d + r] = s;
                    }
                }
            }
            RotorAction::Spectral(s) => {
                out.iter_mut().for_each(|o| *o = 0.0);
                let sign = if transpose { -1.0 } else { 1.0 };
                for (vecs, &phase) in s.resolution.sparse_blocks().iter().zip(s.phases.iter()) {
                    let (sn, cs) = (sign * phase).sin_cos();
                    match vecs.as_slice() {
                        [u] => {
                            let a: f64 = u.iter().map(|&(i, c)| c * x[i]).sum();
                            let a = cs * a;
                            for &(i, c) in u {
                                out[i] += a * c;
                            }
                        }
                        [u, v] => {
                            let a: f64 = u.iter().map(|&(i, c)| c * x[i]).sum();
                            let b: f64 = v.iter().map(|&(i, c)| c * x[i]).sum();
                            let au = a * cs - b * sn;
                            let av = a * sn + b * cs;
                            for &(i, c) in u {
                                out[i] += au * c;
                            }
                            for &(i, c) in v {
                                out[i] += av * c;
                            }
                        }
                        _ => unreachable!("validated block dimension"),
                    }
                }
            }
        }
    }

    pub fn apply(&self, h: &CMVector) -> Result<CMVector> {
        self.check_len(h.space_dim())?;
        let mut out = vec![0.0; h.space_dim()];
        self.apply_slice(h.density(), &mut out, false);
        CMVector::new(*h.grid(), h.dim(), out)
    }

    pub fn apply_transpose(&self, h: &CMVector) -> Result<CMVector> {
        self.check_len(h.space_dim())?;
        let mut out = vec![0.0; h.space_dim()];
        self.apply_slice(h.density(), &mut out, true);
        CMVector::new(*h.grid(), h.dim(), out)
    }

    /// Matrix of `R(w)` in the normalized indicator basis (column `a` is
    /// the coefficient vector of `R e_a`).
    pub fn matrix(&self, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::<f64>::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for a in 0..n {
            e[a] = 1.0;
            self.apply_slice(&e, &mut col, false);
            e[a] = 0.0;
            for (r, v) in col.iter().enumerate() {
                m[(r, a)] = *v;
            }
        }
        m
    }

    fn check_len(&self, n: usize) -> Result<()> {
        let ok = match self {
            RotorAction::Identity => true,
            RotorAction::CellSigns(s) => !s.is_empty() && n.is_multiple_of(s.len()),
            RotorAction::CellMatrices { dim, matrices } => {
                n * dim == matrices.len()
            }
            RotorAction::Spectral(s) => {
                n == s.resolution.grid().n_steps() * s.resolution.dim()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(
                "vector does not match the rotor's space".into(),
            ))
        }
    }
}

/// `R(w) h`.
pub fn apply_rotor(r: &Rotor, w: &DiscretePath, h: &CMVector) -> Result<CMVector> {
    h.same_space_as_path(w)?;
    r.action_at(w)?.apply(h)
}

/// Sign rotor from a one-dimensional auxiliary path: `ḣ(s_i) ↦ sign(b(s_i)) ḣ(s_i)`
/// with `b` read at the left endpoint and `sign(0) = +1`.
pub fn make_sign_rotor(aux: &DiscretePath) -> Result<Rotor> {
    if aux.dim() != 1 {
        return Err(Error::InvalidArgument(format!(
            "sign rotor needs a one-dimensional auxiliary path, got dimension {}",
            aux.dim()
        )));
    }
    let n = aux.grid().n_steps();
    let mut signs = Vec::with_capacity(n);
    let mut b = 0.0;
    for i in 0..n {
        signs.push(if b < 0.0 { -1.0 } else { 1.0 });
        b += aux.increment(i, 0);
    }
    Ok(Rotor::Sign(SignRotor {
        grid: *aux.grid(),
        signs: Arc::new(signs),
    }))
}

/// Draws one phase per spectral point from `law` and returns the resulting
/// spectral rotor. Blocks sharing an angle share the phase.
pub fn resolve_iid_phases(
    resolution: Arc<SpectralResolution>,
    law: &PhaseLaw,
    stream: RngStream,
) -> Result<Rotor> {
    law.validate()?;
    let mut rng = stream.rng();
    let mut phases = Vec::with_capacity(resolution.n_blocks());
    let mut last: Option<(f64, f64)> = None;
    for b in resolution.blocks() {
        let p = match last {
            Some((theta, p)) if theta == b.theta => p,
            _ => law.sample(&mut rng),
        };
        last = Some((b.theta, p));
        if b.basis.len() == 1 && !is_real_phase(p) {
            return Err(Error::InvalidPhase { angle: p });
        }
        phases.push(p);
    }
    Rotor::spectral_with_phases(resolution, phases)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_paths::{cm_inner, sample_brownian};
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn g(n: usize) -> TimeGrid {
        TimeGrid::new(n).unwrap()
    }

    fn random_h(grid: TimeGrid, dim: usize, seed: u64) -> CMVector {
        let w = sample_brownian(&grid, dim, RngStream::new(seed, 77)).unwrap();
        CMVector::from_coefficients(grid, dim, &w.coefficients()).unwrap()
    }

    #[test]
    fn identity_returns_h() {
        let grid = g(8);
        let w = sample_brownian(&grid, 1, RngStream::new(0, 0)).unwrap();
        let h = random_h(grid, 1, 1);
        assert_eq!(apply_rotor(&Rotor::Identity, &w, &h).unwrap(), h);
    }

    #[test]
    fn minus_identity_negates() {
        let grid = g(8);
        let w = sample_brownian(&grid, 2, RngStream::new(0, 0)).unwrap();
        let h = random_h(grid, 2, 2);
        let r = Rotor::constant_matrix(2, vec![-1.0, 0.0, 0.0, -1.0]).unwrap();
        let rh = apply_rotor(&r, &w, &h).unwrap();
        for (a, b) in rh.density().iter().zip(h.density()) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn quarter_turn_in_a_plane() {
        let grid = g(4);
        let res = SpectralResolution::new(
            grid,
            1,
            vec![
                SpectralBlock {
                    theta: 0.0,
                    basis: vec![CMVector::basis_vector(grid, 1, 2).unwrap()],
                },
                SpectralBlock {
                    theta: 0.0,
                    basis: vec![CMVector::basis_vector(grid, 1, 3).unwrap()],
                },
                SpectralBlock {
                    theta: FRAC_PI_2,
                    basis: vec![
                        CMVector::basis_vector(grid, 1, 0).unwrap(),
                        CMVector::basis_vector(grid, 1, 1).unwrap(),
                    ],
                },
            ],
        )
        .unwrap();
        let r = Rotor::spectral(Arc::new(res)).unwrap();
        let w = DiscretePath::zeros(grid, 1).unwrap();
        let e1 = CMVector::basis_vector(grid, 1, 0).unwrap();
        let e2 = CMVector::basis_vector(grid, 1, 1).unwrap();
        let a = apply_rotor(&r, &w, &e1).unwrap();
        let b = apply_rotor(&r, &w, &e2).unwrap();
        for (x, y) in a.density().iter().zip(e2.density()) {
            assert!((x - y).abs() < 1e-15);
        }
        for (x, y) in b.density().iter().zip(e1.density()) {
            assert!((x + y).abs() < 1e-15);
        }
    }

    #[test]
    fn sign_rotor_examples() {
        let grid = g(16);
        let w = sample_brownian(&grid, 1, RngStream::new(3, 0)).unwrap();
        let h = random_h(grid, 1, 3);
        // b(0) = 0 gives +1 at the first cell, positive afterwards
        let pos = DiscretePath::new(grid, 1, vec![0.1; 16]).unwrap();
        let r = make_sign_rotor(&pos).unwrap();
        assert_eq!(apply_rotor(&r, &w, &h).unwrap(), h);
        // b(s_0) = 0 always, so the first cell keeps sign +1
        let neg = DiscretePath::new(grid, 1, vec![-0.1; 16]).unwrap();
        let r = make_sign_rotor(&neg).unwrap();
        let rh = apply_rotor(&r, &w, &h).unwrap();
        assert_eq!(rh.density()[0], h.density()[0]);
        for i in 1..16 {
            assert_eq!(rh.density()[i], -h.density()[i]);
        }
        assert_eq!(rh.norm_sq(), h.norm_sq());
        let twice = apply_rotor(&r, &w, &rh).unwrap();
        assert_eq!(twice, h);
        let bad = DiscretePath::zeros(grid, 2).unwrap();
        assert!(make_sign_rotor(&bad).is_err());
        let other = DiscretePath::zeros(g(8), 1).unwrap();
        let r8 = make_sign_rotor(&other).unwrap();
        assert!(apply_rotor(&r8, &w, &h).is_err());
    }

    #[test]
    fn non_orthogonal_sigma_is_rejected() {
        let grid = g(4);
        let w = sample_brownian(&grid, 2, RngStream::new(0, 0)).unwrap();
        let h = random_h(grid, 2, 9);
        let r = Rotor::constant_matrix(2, vec![1.0, 0.1, 0.0, 1.0]).unwrap();
        assert!(matches!(
            apply_rotor(&r, &w, &h),
            Err(Error::NotOrthogonal { step: 0, .. })
        ));
    }

    #[test]
    fn iid_phase_constant_laws() {
        let grid = g(16);
        let thetas: Vec<f64> = (0..8).map(|j| TAU * j as f64 / 8.0).collect();
        let res = Arc::new(SpectralResolution::cell_planes(grid, 1, &thetas).unwrap());
        let w = sample_brownian(&grid, 1, RngStream::new(0, 0)).unwrap();
        let h = random_h(grid, 1, 5);
        let id = resolve_iid_phases(res.clone(), &PhaseLaw::Constant(0.0), RngStream::new(1, 0))
            .unwrap();
        let a = apply_rotor(&id, &w, &h).unwrap();
        for (x, y) in a.density().iter().zip(h.density()) {
            assert!((x - y).abs() < 1e-14);
        }
        let flip = resolve_iid_phases(res, &PhaseLaw::Constant(PI), RngStream::new(1, 0)).unwrap();
        let b = apply_rotor(&flip, &w, &h).unwrap();
        for (x, y) in b.density().iter().zip(h.density()) {
            assert!((x + y).abs() < 1e-13);
        }
    }

    #[test]
    fn iid_phase_uniform_instances_differ() {
        let grid = g(16);
        let thetas: Vec<f64> = (0..8).map(|j| TAU * j as f64 / 8.0).collect();
        let res = Arc::new(SpectralResolution::cell_planes(grid, 1, &thetas).unwrap());
        let law = PhaseLaw::uniform();
        let a = resolve_iid_phases(res.clone(), &law, RngStream::new(1, 0)).unwrap();
        let b = resolve_iid_phases(res.clone(), &law, RngStream::new(1, 1)).unwrap();
        let c = resolve_iid_phases(res, &law, RngStream::new(1, 0)).unwrap();
        let phases = |r: &Rotor| match r {
            Rotor::Spectral(s) => s.phases().to_vec(),
            _ => unreachable!(),
        };
        let (pa, pb) = (phases(&a), phases(&b));
        assert!(pa.iter().zip(&pb).all(|(x, y)| x != y));
        assert_eq!(pa, phases(&c));
    }

    #[test]
    fn one_dim_block_rejects_complex_phase() {
        let grid = g(2);
        let res = Arc::new(
            SpectralResolution::new(
                grid,
                1,
                vec![
                    SpectralBlock {
                        theta: 0.0,
                        basis: vec![CMVector::basis_vector(grid, 1, 0).unwrap()],
                    },
                    SpectralBlock {
                        theta: PI,
                        basis: vec![CMVector::basis_vector(grid, 1, 1).unwrap()],
                    },
                ],
            )
            .unwrap(),
        );
        assert!(matches!(
            resolve_iid_phases(res.clone(), &PhaseLaw::uniform(), RngStream::new(0, 0)),
            Err(Error::InvalidPhase { .. })
        ));
        let two = PhaseLaw::TwoPoint {
            first: 0.0,
            second: PI,
            p_first: 0.5,
        };
        assert!(resolve_iid_phases(res, &two, RngStream::new(0, 0)).is_ok());
    }

    #[test]
    fn adapted_callback_sees_only_the_past() {
        let grid = g(16);
        let w = sample_brownian(&grid, 2, RngStream::new(8, 0)).unwrap();
        let r = Rotor::planar_rotation(|p| 3.0 * p.position[0] - p.position[1] + p.time());
        let base = match r.action_at(&w).unwrap() {
            RotorAction::CellMatrices { matrices, .. } => matrices,
            _ => unreachable!(),
        };
        for j in 0..16 {
            let mut v = w.clone();
            v.increments_mut()[2 * j] += 0.37;
            let pert = match r.action_at(&v).unwrap() {
                RotorAction::CellMatrices { matrices, .. } => matrices,
                _ => unreachable!(),
            };
            for i in 0..=j {
                assert_eq!(&base[i * 4..(i + 1) * 4], &pert[i * 4..(i + 1) * 4]);
            }
            if j + 1 < 16 {
                assert_ne!(&base[(j + 1) * 4..(j + 2) * 4], &pert[(j + 1) * 4..(j + 2) * 4]);
            }
        }
    }

    #[test]
    fn transpose_is_adjoint() {
        let grid = g(8);
        let res = Arc::new(
            SpectralResolution::random_planes(
                grid,
                2,
                &(0..8).map(|j| j as f64 * 0.7).collect::<Vec<_>>(),
                RngStream::new(2, 2),
            )
            .unwrap(),
        );
        let w = sample_brownian(&grid, 2, RngStream::new(8, 0)).unwrap();
        let rotors = vec![
            Rotor::spectral(res).unwrap(),
            Rotor::planar_rotation(|p| p.position[0]),
        ];
        let h = random_h(grid, 2, 10);
        let k = random_h(grid, 2, 11);
        for r in rotors {
            let a = r.action_at(&w).unwrap();
            let lhs = cm_inner(&a.apply(&h).unwrap(), &k).unwrap();
            let rhs = cm_inner(&h, &a.apply_transpose(&k).unwrap()).unwrap();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
