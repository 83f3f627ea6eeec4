//! Hermite and Wick machinery, second-order multiple integrals and the
//! spectral ergodicity criteria on finite resolutions.
//!
//! Kernels live in the normalized indicator basis `e_a`, in which a path has
//! i.i.d. standard normal coordinates `ξ_a`.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid_paths::{CMVector, DiscretePath, TimeGrid};
use crate::rotors::{PhaseLaw, RotorAction, SpectralResolution};

/// Default largest admissible block mass, as a fraction of `|h|²`.
pub const DEFAULT_ATOM_THRESHOLD: f64 = 0.05;

/// Exponents above this value saturate in [`wick_exponential`].
pub const WICK_EXPONENT_CAP: f64 = 700.0;

const SYMMETRY_TOL: f64 = 1e-12;
const MODULUS_ONE_TOL: f64 = 1e-12;
const MODULUS_GRAY_ZONE: f64 = 1e-6;
const MASS_TOL: f64 = 1e-14;

/// Probabilists' Hermite polynomial `He_n(x)`.
pub fn hermite(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return prev;
    }
    for m in 1..n {
        let next = x * cur - m as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Value of a Wick exponential; `saturated` marks a clamped exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WickValue {
    pub value: f64,
    pub saturated: bool,
}

/// `ρ(δk)(w) = exp(δk(w) − ½|k|²_H)`.
pub fn wick_exponential(k: &CMVector, w: &DiscretePath) -> Result<WickValue> {
    let x = crate::grid_paths::wiener_integral(k, w)? - 0.5 * k.norm_sq();
    Ok(wick_from_exponent(x))
}

pub(crate) fn wick_from_exponent(x: f64) -> WickValue {
    if x > WICK_EXPONENT_CAP {
        WickValue {
            value: WICK_EXPONENT_CAP.exp(),
            saturated: true,
        }
    } else {
        WickValue {
            value: x.exp(),
            saturated: false,
        }
    }
}

/// Symmetric order-2 kernel `K(a, b)` in the indicator basis.
///
/// Diagonal entries are allowed: a rotated off-diagonal kernel generally has
/// one, and the Wick form of [`multiple_integral_2`] handles it.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricKernel2 {
    grid: TimeGrid,
    dim: usize,
    k: DMatrix<f64>,
}

impl SymmetricKernel2 {
    pub fn new(grid: TimeGrid, dim: usize, k: DMatrix<f64>) -> Result<Self> {
        let n = grid.n_steps() * dim;
        if k.nrows() != n || k.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "kernel is {}x{}, space has dimension {n}",
                k.nrows(),
                k.ncols()
            )));
        }
        if k.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("kernel entry"));
        }
        let scale = k.amax().max(1.0);
        for a in 0..n {
            for b in 0..a {
                if (k[(a, b)] - k[(b, a)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::InvalidArgument(format!(
                        "kernel is not symmetric at ({a}, {b})"
                    )));
                }
            }
        }
        Ok(Self { grid, dim, k })
    }

    /// Like [`SymmetricKernel2::new`] but also requires a zero diagonal.
    pub fn off_diagonal(grid: TimeGrid, dim: usize, k: DMatrix<f64>) -> Result<Self> {
        let s = Self::new(grid, dim, k)?;
        if !s.has_zero_diagonal() {
            return Err(Error::InvalidArgument("kernel has a nonzero diagonal".into()));
        }
        Ok(s)
    }

    /// `(M + Mᵀ) / 2`.
    pub fn symmetrize(grid: TimeGrid, dim: usize, m: &DMatrix<f64>) -> Result<Self> {
        Self::new(grid, dim, (m + m.transpose()) * 0.5)
    }

    /// Symmetrized `h ⊗ k`.
    pub fn from_outer(h: &CMVector, k: &CMVector) -> Result<Self> {
        h.same_space(k)?;
        let a = nalgebra::DVector::from_vec(h.coefficients());
        let b = nalgebra::DVector::from_vec(k.coefficients());
        Self::symmetrize(*h.grid(), h.dim(), &(&a * b.transpose()))
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn has_zero_diagonal(&self) -> bool {
        self.k.diagonal().iter().all(|&x| x == 0.0)
    }

    /// Frobenius norm `‖K‖`.
    pub fn norm(&self) -> f64 {
        self.k.norm()
    }
}

/// `I_2(K)(w) = Σ_{a,b} K(a,b) (ξ_a ξ_b − δ_{ab})`; for a zero diagonal this
/// is the off-diagonal double sum. `E[I_2(K)²] = 2‖K‖²`.
pub fn multiple_integral_2(k: &SymmetricKernel2, w: &DiscretePath) -> Result<f64> {
    if *w.grid() != k.grid || w.dim() != k.dim {
        return Err(Error::ShapeMismatch("kernel and path live on different spaces".into()));
    }
    let xi = w.coefficients();
    let n = xi.len();
    let mut acc = 0.0;
    for a in 0..n {
        let row = k.k.row(a);
        let mut s = 0.0;
        for b in 0..n {
            s += row[b] * xi[b];
        }
        acc += xi[a] * s - k.k[(a, a)];
    }
    if !acc.is_finite() {
        return Err(Error::NonFinite("multiple_integral_2"));
    }
    Ok(acc)
}

/// `R^{⊗2} K = R K Rᵀ`.
pub fn rotate_kernel_2(k: &SymmetricKernel2, action: &RotorAction) -> Result<SymmetricKernel2> {
    let n = k.k.nrows();
    let r = action.matrix(n);
    let out = &r * &k.k * r.transpose();
    // rounding can break exact symmetry
    SymmetricKernel2::symmetrize(k.grid, k.dim, &out)
}

/// Outcome of the spectral ergodicity criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Ergodic,
    NonErgodic,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Ergodic => "ergodic",
            Verdict::NonErgodic => "non_ergodic",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicityVerdict {
    /// Largest spectral-point mass relative to `|h|²`.
    pub condition1_max_atom: f64,
    pub condition1_holds: bool,
    /// `|E e^{iψ}|` for each block.
    pub block_moduli: Vec<f64>,
    /// Largest modulus over blocks that carry mass.
    pub condition2_worst_modulus: f64,
    pub condition2_holds: bool,
    /// `max_η |E e^{i(ψ−η)}|` from a direct sweep over `η`, for laws with
    /// atoms; `None` otherwise.
    pub eta_sweep_modulus: Option<f64>,
    pub verdict: Verdict,
}

/// Checks the two spectral criteria on a finite resolution for the
/// direction `h`: no atom heavier than `atom_threshold · |h|²`, and
/// `|E e^{iψ}| < 1` on every block carrying mass.
pub fn spectral_ergodicity_check(
    res: &SpectralResolution,
    law: &PhaseLaw,
    h: &CMVector,
    eta_grid_size: usize,
    atom_threshold: f64,
) -> Result<ErgodicityVerdict> {
    law.validate()?;
    if !(atom_threshold > 0.0 && atom_threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "atom threshold must lie in (0, 1], got {atom_threshold}"
        )));
    }
    let (has_atom, max_atom) = atom_check(res, h, atom_threshold)?;
    let masses = res.block_masses(h)?;
    let total = h.norm_sq();
    let modulus = law.characteristic().norm().min(1.0);
    let block_moduli = vec![modulus; res.n_blocks()];
    let worst = masses
        .iter()
        .zip(&block_moduli)
        .filter(|(m, _)| **m > MASS_TOL * total)
        .map(|(_, &q)| q)
        .fold(0.0, f64::max);

    let eta_sweep_modulus = match law {
        PhaseLaw::TwoPoint { .. } | PhaseLaw::Table(_) if eta_grid_size > 0 => {
            Some(eta_sweep(law, eta_grid_size))
        }
        _ => None,
    };

    let condition2_holds = worst < 1.0 - MODULUS_ONE_TOL;
    let verdict = if has_atom || !condition2_holds {
        Verdict::NonErgodic
    } else if worst > 1.0 - MODULUS_GRAY_ZONE {
        Verdict::Inconclusive
    } else {
        Verdict::Ergodic
    };
    Ok(ErgodicityVerdict {
        condition1_max_atom: max_atom,
        condition1_holds: !has_atom,
        block_moduli,
        condition2_worst_modulus: worst,
        condition2_holds,
        eta_sweep_modulus,
        verdict,
    })
}

fn eta_sweep(law: &PhaseLaw, m: usize) -> f64 {
    let c = law.characteristic();
    (0..m)
        .map(|j| {
            let eta = TAU * j as f64 / m as f64;
            (c * Complex64::from_polar(1.0, -eta)).norm()
        })
        .fold(0.0, f64::max)
}

/// Largest spectral-point mass of `h` relative to `|h|²`. Blocks sharing an
/// angle are one spectral point. The flag is set when the ratio exceeds
/// `threshold`.
pub fn atom_check(res: &SpectralResolution, h: &CMVector, threshold: f64) -> Result<(bool, f64)> {
    let measure = crate::rotors::spectral_measure(res, h)?;
    let total = h.norm_sq();
    let mut best = 0.0_f64;
    let mut i = 0;
    while i < measure.len() {
        let theta = measure[i].0;
        let mut m = 0.0;
        for &(_, mass) in measure[i..].iter().take_while(|(t, _)| *t == theta) {
            m += mass;
            i += 1;
        }
        best = best.max(m / total);
    }
    Ok((best > threshold, best))
}
