//! Time grid, Brownian paths and the discretized Cameron-Martin space.
//!
//! A path is stored by its increments `ΔW_i = W(s_{i+1}) - W(s_i)` on the
//! uniform grid `s_i = i / n`. A Cameron-Martin vector `h` is stored by its
//! cell-constant density `ḣ(s_i)`, so that
//!
//! ```text
//! (h, k)_H = Σ_i ḣ_i · k̇_i dt        δh(w) = Σ_i ḣ_i · ΔW_i
//! ```
//!
//! are exact finite sums. In the normalized indicator basis
//! `e_{i,c} = 1_{[s_i, s_{i+1})} e_c / √dt` the coefficients of `h` are
//! `ḣ_{i,c} √dt` and those of a path are `ΔW_{i,c} / √dt`, which are i.i.d.
//! standard normal under Wiener measure.

mod rng;

pub use rng::{RngStream, StreamRng};

use crate::error::{Error, Result};

const GRID_TOL: f64 = 1e-12;

/// Uniform partition of `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    n_steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(n_steps: usize) -> Result<Self> {
        if n_steps < 2 {
            return Err(Error::InvalidGrid(format!(
                "n_steps must be at least 2, got {n_steps}"
            )));
        }
        Ok(Self {
            n_steps,
            dt: 1.0 / n_steps as f64,
        })
    }

    #[inline]
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Grid point `s_i = i·dt`, `i = 0..=n_steps`.
    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.time(i)).collect()
    }
}

fn check_same_space(
    what: &str,
    (g1, d1): (&TimeGrid, usize),
    (g2, d2): (&TimeGrid, usize),
) -> Result<()> {
    if g1 != g2 || d1 != d2 {
        return Err(Error::ShapeMismatch(format!(
            "{what}: ({} steps, dim {d1}) vs ({} steps, dim {d2})",
            g1.n_steps, g2.n_steps
        )));
    }
    Ok(())
}

/// A `dim`-dimensional path on a grid, stored by its increments
/// (row-major, `n_steps × dim`).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePath {
    grid: TimeGrid,
    dim: usize,
    increments: Vec<f64>,
}

impl DiscretePath {
    pub fn new(grid: TimeGrid, dim: usize, increments: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("path dimension must be positive".into()));
        }
        if increments.len() != grid.n_steps * dim {
            return Err(Error::ShapeMismatch(format!(
                "expected {} increments, got {}",
                grid.n_steps * dim,
                increments.len()
            )));
        }
        Ok(Self {
            grid,
            dim,
            increments,
        })
    }

    pub fn zeros(grid: TimeGrid, dim: usize) -> Result<Self> {
        Self::new(grid, dim, vec![0.0; grid.n_steps * dim])
    }

    /// Builds a path from its coefficients in the normalized indicator basis
    /// (`ΔW = ξ √dt`).
    pub fn from_coefficients(grid: TimeGrid, dim: usize, coefficients: &[f64]) -> Result<Self> {
        let s = grid.dt.sqrt();
        Self::new(grid, dim, coefficients.iter().map(|x| x * s).collect())
    }

    #[inline]
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    #[inline]
    pub fn increments_mut(&mut self) -> &mut [f64] {
        &mut self.increments
    }

    #[inline]
    pub fn increment(&self, step: usize, coord: usize) -> f64 {
        self.increments[step * self.dim + coord]
    }

    /// Increments of cell `step` as a `dim`-slice.
    #[inline]
    pub fn cell(&self, step: usize) -> &[f64] {
        &self.increments[step * self.dim..(step + 1) * self.dim]
    }

    /// `ΔW / √dt`, i.i.d. standard normal under Wiener measure.
    pub fn coefficients(&self) -> Vec<f64> {
        let s = 1.0 / self.grid.dt.sqrt();
        self.increments.iter().map(|x| x * s).collect()
    }

    /// Path values `W(s_i)`, `i = 0..=n_steps`, row-major `(n_steps+1) × dim`.
    pub fn values(&self) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; (self.grid.n_steps + 1) * d];
        for i in 0..self.grid.n_steps {
            for c in 0..d {
                out[(i + 1) * d + c] = out[i * d + c] + self.increments[i * d + c];
            }
        }
        out
    }

    /// `W(1)` per coordinate.
    pub fn terminal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for row in self.increments.chunks_exact(self.dim) {
            for (o, x) in out.iter_mut().zip(row) {
                *o += x;
            }
        }
        out
    }

    /// The Cameron-Martin shift `w + ε k`: `ΔW_i ↦ ΔW_i + ε k̇_i dt`.
    pub fn shifted(&self, k: &CMVector, eps: f64) -> Result<DiscretePath> {
        check_same_space(
            "path shift",
            (&self.grid, self.dim),
            (&k.grid, k.dim),
        )?;
        let a = eps * self.grid.dt;
        let increments = self
            .increments
            .iter()
            .zip(&k.density)
            .map(|(x, h)| x + a * h)
            .collect();
        Ok(DiscretePath {
            grid: self.grid,
            dim: self.dim,
            increments,
        })
    }
}

/// Element of the Cameron-Martin space, stored by its cell-constant density.
#[derive(Debug, Clone, PartialEq)]
pub struct CMVector {
    grid: TimeGrid,
    dim: usize,
    density: Vec<f64>,
}

impl CMVector {
    pub fn new(grid: TimeGrid, dim: usize, density: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("vector dimension must be positive".into()));
        }
        if density.len() != grid.n_steps * dim {
            return Err(Error::ShapeMismatch(format!(
                "expected {} density values, got {}",
                grid.n_steps * dim,
                density.len()
            )));
        }
        if density.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("Cameron-Martin density"));
        }
        Ok(Self { grid, dim, density })
    }

    pub fn zeros(grid: TimeGrid, dim: usize) -> Result<Self> {
        Self::new(grid, dim, vec![0.0; grid.n_steps * dim])
    }

    /// Density given cell-wise by `f(step, coord)`.
    pub fn from_fn(
        grid: TimeGrid,
        dim: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut density = Vec::with_capacity(grid.n_steps * dim);
        for i in 0..grid.n_steps {
            for c in 0..dim {
                density.push(f(i, c));
            }
        }
        Self::new(grid, dim, density)
    }

    /// Builds `h` from its coefficients in the normalized indicator basis.
    pub fn from_coefficients(grid: TimeGrid, dim: usize, coefficients: &[f64]) -> Result<Self> {
        let s = 1.0 / grid.dt.sqrt();
        Self::new(grid, dim, coefficients.iter().map(|x| x * s).collect())
    }

    /// The normalized indicator vector `e_{i,c}` (flat index `i·dim + c`).
    pub fn basis_vector(grid: TimeGrid, dim: usize, flat_index: usize) -> Result<Self> {
        if flat_index >= grid.n_steps * dim {
            return Err(Error::InvalidArgument(format!(
                "basis index {flat_index} out of range"
            )));
        }
        let mut density = vec![0.0; grid.n_steps * dim];
        density[flat_index] = 1.0 / grid.dt.sqrt();
        Self::new(grid, dim, density)
    }

    #[inline]
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn density(&self) -> &[f64] {
        &self.density
    }

    #[inline]
    pub fn density_mut(&mut self) -> &mut [f64] {
        &mut self.density
    }

    /// Dimension of the discrete space, `n_steps · dim`.
    #[inline]
    pub fn space_dim(&self) -> usize {
        self.density.len()
    }

    /// Coefficients in the normalized indicator basis, `ḣ √dt`.
    pub fn coefficients(&self) -> Vec<f64> {
        let s = self.grid.dt.sqrt();
        self.density.iter().map(|x| x * s).collect()
    }

    pub fn norm_sq(&self) -> f64 {
        self.density.iter().map(|x| x * x).sum::<f64>() * self.grid.dt
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.density.iter().all(|&x| x == 0.0)
    }

    pub fn scaled(&self, a: f64) -> CMVector {
        CMVector {
            grid: self.grid,
            dim: self.dim,
            density: self.density.iter().map(|x| a * x).collect(),
        }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &CMVector, b: f64) -> Result<CMVector> {
        check_same_space(
            "linear combination",
            (&self.grid, self.dim),
            (&other.grid, other.dim),
        )?;
        Ok(CMVector {
            grid: self.grid,
            dim: self.dim,
            density: self
                .density
                .iter()
                .zip(&other.density)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    pub(crate) fn same_space(&self, other: &CMVector) -> Result<()> {
        check_same_space(
            "Cameron-Martin vectors",
            (&self.grid, self.dim),
            (&other.grid, other.dim),
        )
    }

    pub(crate) fn same_space_as_path(&self, w: &DiscretePath) -> Result<()> {
        check_same_space(
            "vector vs path",
            (&self.grid, self.dim),
            (&w.grid, w.dim),
        )
    }
}

/// Samples a `dim`-dimensional Brownian path: increments i.i.d. `N(0, dt)`.
pub fn sample_brownian(grid: &TimeGrid, dim: usize, stream: RngStream) -> Result<DiscretePath> {
    if dim == 0 {
        return Err(Error::InvalidArgument("path dimension must be positive".into()));
    }
    let mut increments = vec![0.0; grid.n_steps * dim];
    stream.rng().fill_normal(&mut increments, grid.dt.sqrt());
    DiscretePath::new(*grid, dim, increments)
}

/// `(h, k)_H = Σ_i ḣ_i · k̇_i dt`.
pub fn cm_inner(h: &CMVector, k: &CMVector) -> Result<f64> {
    h.same_space(k)?;
    Ok(h.density
        .iter()
        .zip(&k.density)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        * h.grid.dt)
}

/// The Wiener integral `δh(w) = Σ_i ḣ_i · ΔW_i`.
pub fn wiener_integral(h: &CMVector, w: &DiscretePath) -> Result<f64> {
    h.same_space_as_path(w)?;
    Ok(dot(&h.density, &w.increments))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Density 1 on the grid cells contained in `[a, b)` for coordinate `coord`.
pub fn indicator_vector(
    grid: &TimeGrid,
    dim: usize,
    a: f64,
    b: f64,
    coord: usize,
) -> Result<CMVector> {
    if !(a.is_finite() && b.is_finite()) || a < 0.0 || b > 1.0 || a > b {
        return Err(Error::InvalidArgument(format!(
            "indicator interval [{a}, {b}) must satisfy 0 <= a <= b <= 1"
        )));
    }
    if coord >= dim {
        return Err(Error::InvalidArgument(format!(
            "coordinate {coord} out of range for dimension {dim}"
        )));
    }
    CMVector::from_fn(*grid, dim, |i, c| {
        let inside = grid.time(i) >= a - GRID_TOL && grid.time(i + 1) <= b + GRID_TOL;
        if c == coord && inside {
            1.0
        } else {
            0.0
        }
    })
}
