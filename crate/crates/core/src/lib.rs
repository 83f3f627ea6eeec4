//! Random rotations of Brownian paths on a uniform time grid.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid_paths`]: time grids, Brownian increments, Cameron-Martin vectors
//!   stored as step densities, and the elementary Wiener integral.
//! * [`rotors`]: the random isometries of the Cameron-Martin space (spectral,
//!   i.i.d. phase, adapted matrix and sign rotors) and finite spectral
//!   resolutions of the identity.
//! * [`malliavin`]: finite-difference gradient, Ogawa integral, basis traces,
//!   the Skorohod divergence, the path transformation `T` and its iterates.
//! * [`chaos`]: Hermite polynomials, Wick exponentials, second-order multiple
//!   integrals and the spectral ergodicity criteria.
//! * [`ergostat`]: Monte Carlo harness (Gaussianity, Lévy check, Birkhoff
//!   averages, mixing curves, decay of `(Q_n h, k)`, Girsanov check).

pub mod chaos;
pub mod ergostat;
pub mod error;
pub mod grid_paths;
pub mod malliavin;
pub mod rotors;

pub use error::{Error, Result};
pub use grid_paths::{
    cm_inner, indicator_vector, sample_brownian, wiener_integral, CMVector, DiscretePath,
    RngStream, TimeGrid,
};
pub use rotors::{apply_rotor, PhaseLaw, Rotor, RotorFamily, SpectralResolution};
