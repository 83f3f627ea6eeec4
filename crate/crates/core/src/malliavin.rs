//! Discrete Malliavin calculus on the grid.
//!
//! Directional derivatives are central finite differences along the discrete
//! Cameron-Martin shift `ΔW_i ↦ ΔW_i + ε k̇_i dt`. With that shift the Wiener
//! integral is exactly linear and `∇_k δh = (h, k)_H`, so the divergence
//! identities below hold at the discrete level up to rounding and the
//! `O(ε²)` error of the difference quotient.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid_paths::{dot, CMVector, DiscretePath, RngStream, TimeGrid};
use crate::rotors::{random_orthogonal, Rotor, RotorAction, RotorFamily};

const BASIS_TOL: f64 = 1e-10;

/// Finite-difference settings (central differences).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig {
    pub step: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self { step: 1e-5 }
    }
}

impl FdConfig {
    pub fn new(step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "finite-difference step must be positive, got {step}"
            )));
        }
        Ok(Self { step })
    }

    /// Absolute error budget for one difference quotient: `10 ε² + 1e-9`.
    pub fn tolerance(&self) -> f64 {
        10.0 * self.step * self.step + 1e-9
    }
}

type HFn = dyn Fn(&DiscretePath) -> Result<CMVector> + Send + Sync;

/// A map `u: W → H`.
#[derive(Clone)]
pub struct HValuedMap {
    f: Arc<HFn>,
    smooth: bool,
    adapted: bool,
}

impl std::fmt::Debug for HValuedMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HValuedMap")
            .field("smooth", &self.smooth)
            .field("adapted", &self.adapted)
            .finish()
    }
}

impl HValuedMap {
    pub fn new(f: impl Fn(&DiscretePath) -> Result<CMVector> + Send + Sync + 'static) -> Self {
        Self {
            f: Arc::new(f),
            smooth: true,
            adapted: false,
        }
    }

    /// Marks the map as adapted: cell `i` of `u(w)` depends only on
    /// increments with index `< i`.
    pub fn adapted(
        f: impl Fn(&DiscretePath) -> Result<CMVector> + Send + Sync + 'static,
    ) -> Self {
        Self {
            f: Arc::new(f),
            smooth: true,
            adapted: true,
        }
    }

    pub fn with_smoothness(mut self, smooth: bool) -> Self {
        self.smooth = smooth;
        self
    }

    /// `u ≡ h`.
    pub fn constant(h: CMVector) -> Self {
        Self::adapted(move |_| Ok(h.clone()))
    }

    /// `u(w) = δk(w) · h`, an anticipating field.
    pub fn scalar_times(k: CMVector, h: CMVector) -> Self {
        Self::new(move |w| Ok(h.scaled(crate::grid_paths::wiener_integral(&k, w)?)))
    }

    /// `u(w) = R(w) h`.
    pub fn rotated(rotor: Rotor, h: CMVector) -> Self {
        Self::new(move |w| rotor.action_at(w)?.apply(&h))
    }

    pub fn is_smooth(&self) -> bool {
        self.smooth
    }

    pub fn is_adapted(&self) -> bool {
        self.adapted
    }

    pub fn eval(&self, w: &DiscretePath) -> Result<CMVector> {
        let u = (self.f)(w)?;
        u.same_space_as_path(w)?;
        Ok(u)
    }
}

/// Orthonormal family `φ` of the discrete Cameron-Martin space.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    grid: TimeGrid,
    dim: usize,
    vectors: Vec<CMVector>,
    // indicator-basis coefficients of each vector; None for the indicator basis itself
    coefficients: Option<Vec<Vec<f64>>>,
}

impl OrthonormalBasis {
    /// The normalized indicators `e_{i,c}`, ordered by flat index `i·dim + c`.
    pub fn indicator(grid: TimeGrid, dim: usize) -> Result<Self> {
        let vectors = (0..grid.n_steps() * dim)
            .map(|a| CMVector::basis_vector(grid, dim, a))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid,
            dim,
            vectors,
            coefficients: None,
        })
    }

    /// Validates orthonormality (Gram matrix within `1e-10` of identity).
    pub fn new(vectors: Vec<CMVector>) -> Result<Self> {
        let first = vectors
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty basis".into()))?;
        let (grid, dim) = (*first.grid(), first.dim());
        let n = grid.n_steps() * dim;
        if vectors.len() > n {
            return Err(Error::InvalidArgument(format!(
                "{} vectors cannot be orthonormal in dimension {n}",
                vectors.len()
            )));
        }
        for v in &vectors {
            v.same_space(first)?;
        }
        let coefficients: Vec<Vec<f64>> = vectors.iter().map(|v| v.coefficients()).collect();
        let mut dev: f64 = 0.0;
        for (a, ca) in coefficients.iter().enumerate() {
            for (b, cb) in coefficients.iter().enumerate().skip(a) {
                let target = if a == b { 1.0 } else { 0.0 };
                dev = dev.max((dot(ca, cb) - target).abs());
            }
        }
        if !(dev <= BASIS_TOL) {
            return Err(Error::NotOrthonormal(dev));
        }
        Ok(Self {
            grid,
            dim,
            vectors,
            coefficients: Some(coefficients),
        })
    }

    /// A complete basis obtained by mixing the indicator basis with a Haar
    /// random orthogonal matrix.
    pub fn random(grid: TimeGrid, dim: usize, stream: RngStream) -> Result<Self> {
        let n = grid.n_steps() * dim;
        let q = random_orthogonal(n, &mut stream.rng());
        let vectors = (0..n)
            .map(|j| {
                let c: Vec<f64> = q.column(j).iter().copied().collect();
                CMVector::from_coefficients(grid, dim, &c)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(vectors)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[CMVector] {
        &self.vectors
    }

    fn check_path(&self, w: &DiscretePath) -> Result<()> {
        if *w.grid() != self.grid || w.dim() != self.dim {
            return Err(Error::ShapeMismatch("basis and path live on different spaces".into()));
        }
        Ok(())
    }

    /// `((x, φ_a))_a` for a coefficient vector `x`.
    fn components(&self, x: &[f64]) -> Vec<f64> {
        match &self.coefficients {
            None => x.to_vec(),
            Some(cs) => cs.iter().map(|c| dot(c, x)).collect(),
        }
    }

    fn component(&self, a: usize, x: &[f64]) -> f64 {
        match &self.coefficients {
            None => x[a],
            Some(cs) => dot(&cs[a], x),
        }
    }
}

/// Central-difference directional derivative `∇_k F(w)`.
pub fn gradient_direction(
    f: impl Fn(&DiscretePath) -> f64,
    w: &DiscretePath,
    k: &CMVector,
    cfg: &FdConfig,
) -> Result<f64> {
    let plus = f(&w.shifted(k, cfg.step)?);
    let minus = f(&w.shifted(k, -cfg.step)?);
    if !(plus.is_finite() && minus.is_finite()) {
        return Err(Error::NonFinite("gradient_direction"));
    }
    Ok((plus - minus) / (2.0 * cfg.step))
}

/// `δ^φ ∘ u = Σ_a (u(w), φ_a)_H δφ_a(w)`.
pub fn ogawa_integral(u: &HValuedMap, w: &DiscretePath, basis: &OrthonormalBasis) -> Result<f64> {
    basis.check_path(w)?;
    let uw = u.eval(w)?.coefficients();
    let xi = w.coefficients();
    let cu = basis.components(&uw);
    let cw = basis.components(&xi);
    let v = dot(&cu, &cw);
    if !v.is_finite() {
        return Err(Error::NonFinite("ogawa_integral"));
    }
    Ok(v)
}

/// `trace^φ ∇u = Σ_a ∇_{φ_a} (u, φ_a)_H`, by central differences.
pub fn phi_trace(
    u: &HValuedMap,
    w: &DiscretePath,
    basis: &OrthonormalBasis,
    cfg: &FdConfig,
) -> Result<f64> {
    basis.check_path(w)?;
    let mut acc = 0.0;
    for (a, phi) in basis.vectors.iter().enumerate() {
        let plus = u.eval(&w.shifted(phi, cfg.step)?)?.coefficients();
        let minus = u.eval(&w.shifted(phi, -cfg.step)?)?.coefficients();
        let d = (basis.component(a, &plus) - basis.component(a, &minus)) / (2.0 * cfg.step);
        if !d.is_finite() {
            return Err(Error::NonFinite("phi_trace"));
        }
        acc += d;
    }
    Ok(acc)
}

/// Skorohod divergence `δu = δ^φ ∘ u − trace^φ ∇u`.
pub fn skorohod(
    u: &HValuedMap,
    w: &DiscretePath,
    basis: &OrthonormalBasis,
    cfg: &FdConfig,
) -> Result<f64> {
    Ok(ogawa_integral(u, w, basis)? - phi_trace(u, w, basis, cfg)?)
}

/// Applies the rotation `T` generated by `R` to the path `w`.
///
/// In indicator coefficients `T(w) = Σ_a δ(R e_a)(w) e_a` reads
/// `ξ(Tw) = R(w)ᵀ ξ(w)`, i.e. `ΔY_i = σ(s_i, w)ᵀ ΔW_i` for cell-local rotors.
/// The Skorohod integrals `δ(R e_a)` reduce to Itô sums here because every
/// variant has a vanishing trace in the indicator basis (deterministic,
/// independent of `w`, or adapted).
pub fn transform(r: &Rotor, w: &DiscretePath) -> Result<DiscretePath> {
    let action = r.action_at(w)?;
    transform_with(&action, w)
}

pub(crate) fn transform_with(action: &RotorAction, w: &DiscretePath) -> Result<DiscretePath> {
    let mut out = vec![0.0; w.increments().len()];
    action.apply_slice(w.increments(), &mut out, true);
    DiscretePath::new(*w.grid(), w.dim(), out)
}

/// `T(w) = Σ_a δ(R φ_a)(w) φ_a` computed literally: one Skorohod integral
/// (Ogawa sum minus finite-difference trace) per basis vector. Agrees with
/// [`transform`] whenever `trace^φ ∇(R h) = 0`.
pub fn transform_by_expansion(
    r: &Rotor,
    w: &DiscretePath,
    basis: &OrthonormalBasis,
    cfg: &FdConfig,
) -> Result<DiscretePath> {
    basis.check_path(w)?;
    let n = w.increments().len();
    let mut density = vec![0.0; n];
    for phi in basis.vectors() {
        let u = HValuedMap::rotated(r.clone(), phi.clone());
        let c = skorohod(&u, w, basis, cfg)?;
        for (d, p) in density.iter_mut().zip(phi.density()) {
            *d += c * p;
        }
    }
    let dt = w.grid().dt();
    DiscretePath::new(*w.grid(), w.dim(), density.into_iter().map(|x| x * dt).collect())
}

/// The orbit `w, Tw, ..., T^n w` of a rotor family together with the
/// operators `R_j(T^{j-1} w)`.
#[derive(Debug, Clone)]
pub struct RotorSequence {
    paths: Vec<DiscretePath>,
    actions: Vec<RotorAction>,
}

impl RotorSequence {
    /// Level `j` uses `family.level(aux, j)` evaluated at `T^{j-1} w`.
    pub fn build(family: &RotorFamily, aux: RngStream, w: &DiscretePath, n: usize) -> Result<Self> {
        let mut paths = Vec::with_capacity(n + 1);
        let mut actions = Vec::with_capacity(n);
        paths.push(w.clone());
        for j in 1..=n {
            let action = family.level(aux, j)?.action_at(&paths[j - 1])?;
            let next = transform_with(&action, &paths[j - 1])?;
            actions.push(action);
            paths.push(next);
        }
        Ok(Self { paths, actions })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// `T^j w`, `j = 0..=len`.
    pub fn path(&self, j: usize) -> &DiscretePath {
        &self.paths[j]
    }

    pub fn actions(&self) -> &[RotorAction] {
        &self.actions
    }

    /// `Q_m h = R_1(w) R_2(Tw) ⋯ R_m(T^{m-1} w) h`.
    pub fn apply_q(&self, m: usize, h: &CMVector) -> Result<CMVector> {
        if m > self.len() {
            return Err(Error::InvalidArgument(format!(
                "Q_{m} requested from a sequence of length {}",
                self.len()
            )));
        }
        h.same_space_as_path(&self.paths[0])?;
        let mut v = h.clone();
        for a in self.actions[..m].iter().rev() {
            v = a.apply(&v)?;
        }
        Ok(v)
    }

    /// `Q_1 h, ..., Q_len h`, each composed from scratch.
    pub fn q_vectors(&self, h: &CMVector) -> Result<Vec<CMVector>> {
        (1..=self.len()).map(|m| self.apply_q(m, h)).collect()
    }

    /// `Q_1ᵀ k, ..., Q_lenᵀ k`, built incrementally as `Q_mᵀ = R_mᵀ Q_{m-1}ᵀ`.
    pub fn q_transpose_vectors(&self, k: &CMVector) -> Result<Vec<CMVector>> {
        k.same_space_as_path(&self.paths[0])?;
        let mut out = Vec::with_capacity(self.len());
        let mut v = k.clone();
        for a in &self.actions {
            v = a.apply_transpose(&v)?;
            out.push(v.clone());
        }
        Ok(out)
    }
}

/// `T w, T² w, ..., T^n w`.
pub fn iterate_transform(
    family: &RotorFamily,
    aux: RngStream,
    w: &DiscretePath,
    n: usize,
) -> Result<Vec<DiscretePath>> {
    let seq = RotorSequence::build(family, aux, w, n)?;
    Ok(seq.paths.into_iter().skip(1).collect())
}

/// `Q_1 h, ..., Q_n h`.
pub fn iterate_q(
    family: &RotorFamily,
    aux: RngStream,
    w: &DiscretePath,
    n: usize,
    h: &CMVector,
) -> Result<Vec<CMVector>> {
    RotorSequence::build(family, aux, w, n)?.q_vectors(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_paths::{cm_inner, sample_brownian, wiener_integral};

    fn setup(n: usize, dim: usize, seed: u64) -> (TimeGrid, DiscretePath) {
        let g = TimeGrid::new(n).unwrap();
        let w = sample_brownian(&g, dim, RngStream::new(seed, 0)).unwrap();
        (g, w)
    }

    fn vec_from(g: TimeGrid, dim: usize, seed: u64) -> CMVector {
        let p = sample_brownian(&g, dim, RngStream::new(seed, 99)).unwrap();
        CMVector::from_coefficients(g, dim, &p.coefficients()).unwrap()
    }

    #[test]
    fn gradient_examples() {
        let (g, w) = setup(32, 1, 1);
        let h = vec_from(g, 1, 2);
        let k = vec_from(g, 1, 3);
        let cfg = FdConfig::default();
        let lin = gradient_direction(|p| wiener_integral(&h, p).unwrap(), &w, &k, &cfg).unwrap();
        assert!((lin - cm_inner(&h, &k).unwrap()).abs() < 1e-8);
        let c = gradient_direction(|_| 3.0, &w, &k, &cfg).unwrap();
        assert_eq!(c, 0.0);
        let sq = gradient_direction(|p| wiener_integral(&h, p).unwrap().powi(2), &w, &k, &cfg)
            .unwrap();
        let closed = 2.0 * wiener_integral(&h, &w).unwrap() * cm_inner(&h, &k).unwrap();
        assert!((sq - closed).abs() < 1e-6);
        assert!(gradient_direction(|_| f64::NAN, &w, &k, &cfg).is_err());
    }

    #[test]
    fn ogawa_of_constant_field_is_basis_free() {
        let (g, w) = setup(16, 1, 4);
        let h = vec_from(g, 1, 5);
        let u = HValuedMap::constant(h.clone());
        let ind = OrthonormalBasis::indicator(g, 1).unwrap();
        let rnd = OrthonormalBasis::random(g, 1, RngStream::new(6, 6)).unwrap();
        let dh = wiener_integral(&h, &w).unwrap();
        assert!((ogawa_integral(&u, &w, &ind).unwrap() - dh).abs() < 1e-12);
        assert!((ogawa_integral(&u, &w, &rnd).unwrap() - dh).abs() < 1e-10);
        let zero = HValuedMap::constant(CMVector::zeros(g, 1).unwrap());
        assert_eq!(ogawa_integral(&zero, &w, &ind).unwrap(), 0.0);
    }

    #[test]
    fn anticipating_field_splits_into_ogawa_and_trace() {
        let (g, w) = setup(16, 1, 7);
        let h = vec_from(g, 1, 8);
        let k = vec_from(g, 1, 9);
        let u = HValuedMap::scalar_times(k.clone(), h.clone());
        let basis = OrthonormalBasis::indicator(g, 1).unwrap();
        let cfg = FdConfig::default();
        let (dh, dk, hk) = (
            wiener_integral(&h, &w).unwrap(),
            wiener_integral(&k, &w).unwrap(),
            cm_inner(&h, &k).unwrap(),
        );
        assert!((ogawa_integral(&u, &w, &basis).unwrap() - dk * dh).abs() < 1e-10);
        assert!((phi_trace(&u, &w, &basis, &cfg).unwrap() - hk).abs() < 1e-6);
        assert!((skorohod(&u, &w, &basis, &cfg).unwrap() - (dk * dh - hk)).abs() < 1e-6);
        let c = HValuedMap::constant(h);
        assert_eq!(phi_trace(&c, &w, &basis, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn non_orthonormal_basis_rejected() {
        let g = TimeGrid::new(4).unwrap();
        let e0 = CMVector::basis_vector(g, 1, 0).unwrap();
        assert!(matches!(
            OrthonormalBasis::new(vec![e0.clone(), e0.scaled(0.5)]),
            Err(Error::NotOrthonormal(_))
        ));
        assert!(OrthonormalBasis::new(vec![]).is_err());
    }

    #[test]
    fn transform_examples() {
        let (_, w) = setup(16, 2, 10);
        assert_eq!(transform(&Rotor::Identity, &w).unwrap(), w);
        let neg = Rotor::constant_matrix(2, vec![-1.0, 0.0, 0.0, -1.0]).unwrap();
        let t = transform(&neg, &w).unwrap();
        for (a, b) in t.increments().iter().zip(w.increments()) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn expansion_matches_fast_transform() {
        let (g, w) = setup(8, 2, 11);
        let basis = OrthonormalBasis::random(g, 2, RngStream::new(1, 2)).unwrap();
        let cfg = FdConfig::default();
        let r = Rotor::planar_rotation(|p| 2.0 * p.position[0] + p.position[1]);
        let fast = transform(&r, &w).unwrap();
        let slow = transform_by_expansion(&r, &w, &basis, &cfg).unwrap();
        for (a, b) in fast.increments().iter().zip(slow.increments()) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn sign_q_is_product_of_signs() {
        let (g, w) = setup(32, 1, 12);
        let fam = RotorFamily::Sign { grid: g };
        let aux = RngStream::new(13, 0);
        let h = vec_from(g, 1, 14);
        let qs = iterate_q(&fam, aux, &w, 4, &h).unwrap();
        let mut prod = vec![1.0; 32];
        for (j, q) in qs.iter().enumerate() {
            let b = sample_brownian(&g, 1, aux.substream(j as u64 + 1)).unwrap();
            let vals = b.values();
            for (i, p) in prod.iter_mut().enumerate() {
                *p *= if vals[i] < 0.0 { -1.0 } else { 1.0 };
            }
            for i in 0..32 {
                assert_eq!(q.density()[i], prod[i] * h.density()[i]);
            }
            assert!((q.norm() - h.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_family_q_is_identity() {
        let (g, w) = setup(8, 1, 15);
        let h = vec_from(g, 1, 16);
        let qs = iterate_q(&RotorFamily::Fixed(Rotor::Identity), RngStream::new(0, 0), &w, 5, &h)
            .unwrap();
        assert!(qs.iter().all(|q| *q == h));
        let ts = iterate_transform(&RotorFamily::Fixed(Rotor::Identity), RngStream::new(0, 0), &w, 3)
            .unwrap();
        assert!(ts.iter().all(|t| *t == w));
    }

    #[test]
    fn transpose_products_are_adjoint() {
        let (g, w) = setup(16, 2, 17);
        let fam = RotorFamily::Fixed(Rotor::planar_rotation(|p| p.position[0] - p.time()));
        let seq = RotorSequence::build(&fam, RngStream::new(0, 0), &w, 6).unwrap();
        let h = vec_from(g, 2, 18);
        let k = vec_from(g, 2, 19);
        let qh = seq.q_vectors(&h).unwrap();
        let qk = seq.q_transpose_vectors(&k).unwrap();
        for (a, b) in qh.iter().zip(&qk) {
            let lhs = cm_inner(&k, a).unwrap();
            let rhs = cm_inner(b, &h).unwrap();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
