//! Finite resolutions of the identity and phase laws.
//!
//! A unitary operator `∫ e^{iφ(θ)} dp_θ` of the complexified Cameron-Martin
//! space is represented in real form: the spectral projections are
//! orthogonal blocks of dimension 2 (where the phase acts as a planar
//! rotation) or 1 (where only the phases 0 and π, i.e. ±1, are real).

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid_paths::{CMVector, RngStream, StreamRng, TimeGrid};

const ORTHO_TOL: f64 = 1e-12;
const PHASE_TOL: f64 = 1e-12;

pub(crate) type SparseVec = Vec<(usize, f64)>;

/// One spectral block: an angle and an orthonormal basis (1 or 2 vectors)
/// of the block subspace.
#[derive(Debug, Clone)]
pub struct SpectralBlock {
    pub theta: f64,
    pub basis: Vec<CMVector>,
}

/// Finite resolution of the identity on the discretized Cameron-Martin space.
#[derive(Debug, Clone)]
pub struct SpectralResolution {
    grid: TimeGrid,
    dim: usize,
    blocks: Vec<SpectralBlock>,
    // Basis vectors in indicator-basis coefficients, zeros dropped.
    sparse: Vec<Vec<SparseVec>>,
}

/// Reduces an angle to `[0, 2π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Whether `a` is (mod 2π) one of the real phases 0 or π.
pub fn is_real_phase(a: f64) -> bool {
    let r = wrap_angle(a);
    r < PHASE_TOL || (r - PI).abs() < PHASE_TOL || (TAU - r) < PHASE_TOL
}

fn to_sparse(v: &CMVector) -> SparseVec {
    v.coefficients()
        .into_iter()
        .enumerate()
        .filter(|(_, x)| *x != 0.0)
        .collect()
}

fn sparse_dot(a: &SparseVec, dense: &[f64]) -> f64 {
    a.iter().map(|&(i, x)| x * dense[i]).sum()
}

impl SpectralResolution {
    /// Validates and builds a resolution from `(theta, basis)` blocks.
    pub fn new(grid: TimeGrid, dim: usize, blocks: Vec<SpectralBlock>) -> Result<Self> {
        let n = grid.n_steps() * dim;
        let mut total = 0;
        let mut prev = f64::NEG_INFINITY;
        for b in &blocks {
            if !(0.0..TAU).contains(&b.theta) {
                return Err(Error::InvalidArgument(format!(
                    "block angle {} outside [0, 2pi)",
                    b.theta
                )));
            }
            if b.theta < prev {
                return Err(Error::InvalidArgument(
                    "block angles must be nondecreasing".into(),
                ));
            }
            prev = b.theta;
            match b.basis.len() {
                1 => {
                    if !is_real_phase(b.theta) {
                        return Err(Error::InvalidPhase { angle: b.theta });
                    }
                }
                2 => {}
                k => {
                    return Err(Error::InvalidArgument(format!(
                        "block dimension must be 1 or 2, got {k}"
                    )))
                }
            }
            for v in &b.basis {
                if *v.grid() != grid || v.dim() != dim {
                    return Err(Error::ShapeMismatch(
                        "block vector lives on a different space".into(),
                    ));
                }
            }
            total += b.basis.len();
        }
        if total != n {
            return Err(Error::InvalidArgument(format!(
                "blocks span dimension {total}, space has dimension {n}"
            )));
        }
        let sparse: Vec<Vec<SparseVec>> = blocks
            .iter()
            .map(|b| b.basis.iter().map(to_sparse).collect())
            .collect();

        // Gram matrix of all basis vectors must be the identity.
        let mut cols = DMatrix::<f64>::zeros(n, n);
        for (j, v) in sparse.iter().flatten().enumerate() {
            for &(i, x) in v {
                cols[(i, j)] = x;
            }
        }
        let gram = cols.transpose() * &cols;
        let dev = (gram - DMatrix::<f64>::identity(n, n)).amax();
        if dev > ORTHO_TOL {
            return Err(Error::NotOrthonormal(dev));
        }
        Ok(Self {
            grid,
            dim,
            blocks,
            sparse,
        })
    }

    /// Two-dimensional blocks spanned by consecutive indicator basis vectors
    /// `(e_{2j}, e_{2j+1})` (flat indices), block `j` at angle `thetas[j]`.
    pub fn cell_planes(grid: TimeGrid, dim: usize, thetas: &[f64]) -> Result<Self> {
        let n = grid.n_steps() * dim;
        if !n.is_multiple_of(2) || thetas.len() != n / 2 {
            return Err(Error::InvalidArgument(format!(
                "cell_planes needs {} angles for a space of dimension {n}",
                n / 2
            )));
        }
        let blocks = thetas
            .iter()
            .enumerate()
            .map(|(j, &theta)| {
                Ok(SpectralBlock {
                    theta,
                    basis: vec![
                        CMVector::basis_vector(grid, dim, 2 * j)?,
                        CMVector::basis_vector(grid, dim, 2 * j + 1)?,
                    ],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, dim, blocks)
    }

    /// Two-dimensional blocks spanned by consecutive columns of a Haar
    /// random orthogonal matrix.
    pub fn random_planes(
        grid: TimeGrid,
        dim: usize,
        thetas: &[f64],
        stream: RngStream,
    ) -> Result<Self> {
        let n = grid.n_steps() * dim;
        if !n.is_multiple_of(2) || thetas.len() != n / 2 {
            return Err(Error::InvalidArgument(format!(
                "random_planes needs {} angles for a space of dimension {n}",
                n / 2
            )));
        }
        let q = random_orthogonal(n, &mut stream.rng());
        let blocks = thetas
            .iter()
            .enumerate()
            .map(|(j, &theta)| {
                let col = |c: usize| {
                    let x: Vec<f64> = q.column(c).iter().copied().collect();
                    CMVector::from_coefficients(grid, dim, &x)
                };
                Ok(SpectralBlock {
                    theta,
                    basis: vec![col(2 * j)?, col(2 * j + 1)?],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, dim, blocks)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[SpectralBlock] {
        &self.blocks
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.theta).collect()
    }

    pub(crate) fn sparse_blocks(&self) -> &[Vec<SparseVec>] {
        &self.sparse
    }

    /// Orthogonal projection of `h` on block `j`.
    pub fn project(&self, j: usize, h: &CMVector) -> Result<CMVector> {
        self.check_vector(h)?;
        let x = h.coefficients();
        let mut out = vec![0.0; x.len()];
        for v in &self.sparse[j] {
            let a = sparse_dot(v, &x);
            for &(i, c) in v {
                out[i] += a * c;
            }
        }
        CMVector::from_coefficients(self.grid, self.dim, &out)
    }

    /// Squared norms of the projections of `h` on each block.
    pub fn block_masses(&self, h: &CMVector) -> Result<Vec<f64>> {
        self.check_vector(h)?;
        let x = h.coefficients();
        Ok(self
            .sparse
            .iter()
            .map(|b| b.iter().map(|v| sparse_dot(v, &x).powi(2)).sum())
            .collect())
    }

    pub(crate) fn check_vector(&self, h: &CMVector) -> Result<()> {
        if *h.grid() != self.grid || h.dim() != self.dim {
            return Err(Error::ShapeMismatch(
                "vector does not live on the resolution's space".into(),
            ));
        }
        Ok(())
    }
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `diag(R)` folded into `Q`.
pub fn random_orthogonal(n: usize, rng: &mut StreamRng) -> DMatrix<f64> {
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.standard_normal());
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `(θ_j, |p_j h|²)` for every block. Masses sum to `|h|²_H`.
pub fn spectral_measure(res: &SpectralResolution, h: &CMVector) -> Result<Vec<(f64, f64)>> {
    res.check_vector(h)?;
    if h.is_zero() {
        return Err(Error::ZeroVector);
    }
    let masses = res.block_masses(h)?;
    Ok(res.blocks.iter().map(|b| b.theta).zip(masses).collect())
}

/// Law of the random phase attached to each spectral point.
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseLaw {
    Constant(f64),
    Uniform { low: f64, high: f64 },
    TwoPoint { first: f64, second: f64, p_first: f64 },
    /// `(angle, probability)` atoms.
    Table(Vec<(f64, f64)>),
}

impl PhaseLaw {
    /// Uniform law on `[0, 2π)`.
    pub fn uniform() -> Self {
        PhaseLaw::Uniform {
            low: 0.0,
            high: TAU,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PhaseLaw::Constant(_) => "constant",
            PhaseLaw::Uniform { .. } => "uniform",
            PhaseLaw::TwoPoint { .. } => "two_point",
            PhaseLaw::Table(_) => "custom_table",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("phase law: {m}")));
        match self {
            PhaseLaw::Constant(a) if !a.is_finite() => bad("non-finite constant"),
            PhaseLaw::Uniform { low, high } if !(low.is_finite() && high.is_finite() && low < high) => {
                bad("uniform law needs low < high")
            }
            PhaseLaw::TwoPoint { first, second, p_first }
                if !(first.is_finite() && second.is_finite() && (0.0..=1.0).contains(p_first)) =>
            {
                bad("two-point law needs finite atoms and p in [0, 1]")
            }
            PhaseLaw::Table(atoms) => {
                if atoms.is_empty() {
                    return bad("empty table");
                }
                if atoms.iter().any(|(a, p)| !a.is_finite() || !(*p >= 0.0)) {
                    return bad("table atoms must be finite with nonnegative weights");
                }
                let s: f64 = atoms.iter().map(|(_, p)| p).sum();
                if (s - 1.0).abs() > 1e-9 {
                    return bad("table probabilities must sum to 1");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn sample(&self, rng: &mut StreamRng) -> f64 {
        match self {
            PhaseLaw::Constant(a) => *a,
            PhaseLaw::Uniform { low, high } => low + (high - low) * rng.uniform(),
            PhaseLaw::TwoPoint {
                first,
                second,
                p_first,
            } => {
                if rng.uniform() < *p_first {
                    *first
                } else {
                    *second
                }
            }
            PhaseLaw::Table(atoms) => {
                let u = rng.uniform();
                let mut acc = 0.0;
                for (a, p) in atoms {
                    acc += p;
                    if u < acc {
                        return *a;
                    }
                }
                atoms[atoms.len() - 1].0
            }
        }
    }

    /// `E[e^{iψ}]` in closed form.
    pub fn characteristic(&self) -> Complex64 {
        match self {
            PhaseLaw::Constant(a) => Complex64::from_polar(1.0, *a),
            PhaseLaw::Uniform { low, high } => {
                let w = high - low;
                if (w - TAU).abs() < 1e-15 {
                    return Complex64::new(0.0, 0.0);
                }
                (Complex64::from_polar(1.0, *high) - Complex64::from_polar(1.0, *low))
                    / Complex64::new(0.0, w)
            }
            PhaseLaw::TwoPoint {
                first,
                second,
                p_first,
            } => {
                Complex64::from_polar(*p_first, *first)
                    + Complex64::from_polar(1.0 - p_first, *second)
            }
            PhaseLaw::Table(atoms) => atoms
                .iter()
                .map(|(a, p)| Complex64::from_polar(*p, *a))
                .sum(),
        }
    }

    /// Whether every value of the law is a real phase (0 or π mod 2π).
    pub fn is_real_valued(&self) -> bool {
        match self {
            PhaseLaw::Constant(a) => is_real_phase(*a),
            PhaseLaw::Uniform { .. } => false,
            PhaseLaw::TwoPoint {
                first,
                second,
                p_first,
            } => {
                (*p_first == 0.0 || is_real_phase(*first))
                    && (*p_first == 1.0 || is_real_phase(*second))
            }
            PhaseLaw::Table(atoms) => atoms.iter().all(|(a, p)| *p == 0.0 || is_real_phase(*a)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn angles(m: usize) -> Vec<f64> {
        (0..m).map(|j| TAU * j as f64 / m as f64).collect()
    }

    #[test]
    fn cell_planes_is_valid_and_complete() {
        let g = TimeGrid::new(16).unwrap();
        let res = SpectralResolution::cell_planes(g, 1, &angles(8)).unwrap();
        assert_eq!(res.n_blocks(), 8);
        let h = CMVector::from_fn(g, 1, |i, _| 1.0 + i as f64).unwrap();
        let m: f64 = res.block_masses(&h).unwrap().iter().sum();
        assert!((m - h.norm_sq()).abs() < 1e-10);
    }

    #[test]
    fn random_planes_are_orthonormal() {
        let g = TimeGrid::new(16).unwrap();
        let res =
            SpectralResolution::random_planes(g, 2, &angles(16), RngStream::new(4, 0)).unwrap();
        let h = CMVector::from_fn(g, 2, |i, c| (i * 3 + c) as f64 * 0.1 - 0.7).unwrap();
        let m: f64 = res.block_masses(&h).unwrap().iter().sum();
        assert!((m - h.norm_sq()).abs() < 1e-10);
    }

    #[test]
    fn projections_idempotent() {
        let g = TimeGrid::new(8).unwrap();
        let res =
            SpectralResolution::random_planes(g, 1, &angles(4), RngStream::new(9, 2)).unwrap();
        let h = CMVector::from_fn(g, 1, |i, _| (i as f64).cos()).unwrap();
        for j in 0..4 {
            let p = res.project(j, &h).unwrap();
            let pp = res.project(j, &p).unwrap();
            for (a, b) in p.density().iter().zip(pp.density()) {
                assert!((a - b).abs() < 1e-12);
            }
            for k in 0..4 {
                if k != j {
                    let q = res.project(k, &p).unwrap();
                    assert!(q.norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_blocks() {
        let g = TimeGrid::new(4).unwrap();
        let e = |i| CMVector::basis_vector(g, 1, i).unwrap();
        // incomplete
        let blocks = vec![SpectralBlock {
            theta: 0.0,
            basis: vec![e(0), e(1)],
        }];
        assert!(SpectralResolution::new(g, 1, blocks).is_err());
        // non-orthogonal
        let blocks = vec![
            SpectralBlock {
                theta: 0.0,
                basis: vec![e(0), e(0)],
            },
            SpectralBlock {
                theta: 1.0,
                basis: vec![e(2), e(3)],
            },
        ];
        assert!(matches!(
            SpectralResolution::new(g, 1, blocks),
            Err(Error::NotOrthonormal(_))
        ));
        // 1-dim block with a complex angle
        let blocks = vec![
            SpectralBlock {
                theta: 0.5,
                basis: vec![e(0)],
            },
            SpectralBlock {
                theta: 1.0,
                basis: vec![e(1)],
            },
            SpectralBlock {
                theta: 2.0,
                basis: vec![e(2), e(3)],
            },
        ];
        assert!(matches!(
            SpectralResolution::new(g, 1, blocks),
            Err(Error::InvalidPhase { .. })
        ));
        // decreasing angles
        assert!(SpectralResolution::cell_planes(g, 1, &[1.0, 0.5]).is_err());
    }

    #[test]
    fn spectral_measure_examples() {
        let g = TimeGrid::new(8).unwrap();
        let res = SpectralResolution::cell_planes(g, 1, &angles(4)).unwrap();
        let inside = CMVector::basis_vector(g, 1, 3).unwrap();
        let m = spectral_measure(&res, &inside).unwrap();
        assert!((m[1].1 - 1.0).abs() < 1e-14);
        assert_eq!(m.iter().filter(|(_, x)| *x > 0.0).count(), 1);
        let z = CMVector::zeros(g, 1).unwrap();
        assert_eq!(spectral_measure(&res, &z), Err(Error::ZeroVector));
        let two = CMVector::basis_vector(g, 1, 0)
            .unwrap()
            .combine(1.0, &CMVector::basis_vector(g, 1, 5).unwrap(), 1.0)
            .unwrap();
        let m = spectral_measure(&res, &two).unwrap();
        assert!((m[0].1 - 1.0).abs() < 1e-14 && (m[2].1 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn characteristic_values() {
        assert!(PhaseLaw::uniform().characteristic().norm() < 1e-15);
        assert!((PhaseLaw::Constant(1.3).characteristic().norm() - 1.0).abs() < 1e-15);
        let tp = PhaseLaw::TwoPoint {
            first: 0.0,
            second: PI,
            p_first: 0.5,
        };
        assert!(tp.characteristic().norm() < 1e-15);
        let tab = PhaseLaw::Table(vec![(0.0, 0.25), (PI / 2.0, 0.25), (PI, 0.25), (1.5 * PI, 0.25)]);
        assert!(tab.characteristic().norm() < 1e-15);
        let half = PhaseLaw::Uniform { low: 0.0, high: PI };
        // (e^{iπ} - 1) / (iπ) = 2i/π
        let c = half.characteristic();
        assert!(c.re.abs() < 1e-15 && (c.im - 2.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn law_validation() {
        assert!(PhaseLaw::Uniform { low: 1.0, high: 1.0 }.validate().is_err());
        assert!(PhaseLaw::Table(vec![(0.0, 0.3)]).validate().is_err());
        assert!(PhaseLaw::TwoPoint {
            first: 0.0,
            second: 1.0,
            p_first: 1.5
        }
        .validate()
        .is_err());
        assert!(PhaseLaw::uniform().validate().is_ok());
    }

    #[test]
    fn sampling_matches_characteristic() {
        let law = PhaseLaw::Table(vec![(0.3, 0.5), (2.0, 0.2), (4.0, 0.3)]);
        let mut rng = RngStream::new(1, 1).rng();
        let m = 200_000;
        let mut acc = Complex64::new(0.0, 0.0);
        for _ in 0..m {
            acc += Complex64::from_polar(1.0, law.sample(&mut rng));
        }
        let emp = acc / m as f64;
        assert!((emp - law.characteristic()).norm() < 4.0 / (m as f64).sqrt());
    }
}
