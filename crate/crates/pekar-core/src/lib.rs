//! Fourier-spectral toolkit for the classical (Pekar) polaron problem on the
//! flat 3-torus `[-L/2, L/2)³`.
//!
//! The crate is layered bottom-up:
//! [`lattice`] and [`green`] provide fields, multipliers and the periodic
//! Green function; [`functionals`] evaluates the energies; [`schroedinger`]
//! solves the linear eigenvalue and resolvent problems; [`scf`] finds the
//! minimizer; [`hessian`] assembles and diagonalizes the Hessian operators;
//! [`orbit`] handles the translation orbit and its coordinates; [`cutoff`]
//! evaluates the ultraviolet lattice sums.

pub mod basis;
pub mod cutoff;
mod eigen;
pub mod error;
mod fft;
pub mod functionals;
pub mod green;
pub mod hessian;
pub mod io;
pub mod lattice;
pub mod orbit;
pub mod scf;
pub mod schroedinger;
pub mod symmetry;

pub use error::{Error, Result};
pub use lattice::{Field, MomentumLattice, Multiplier, Point, ZeroMode, C64};

/// Crate version, recorded in run reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
