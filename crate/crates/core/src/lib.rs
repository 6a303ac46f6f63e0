//! Numerical laboratory for spectral instability of non-self-adjoint
//! operators on the circle.
//!
//! The crate is organised bottom-up: [`symbol`] builds truncated Fourier
//! matrices of differential operators with periodic coefficients,
//! [`numerics`] supplies the dense linear algebra, and the remaining modules
//! implement pseudospectra, WKB quasimodes, Grushin reductions, random
//! perturbations with Weyl-law statistics, argument-principle zero counting
//! and the rotated harmonic oscillator.

pub mod boundary;
pub mod error;
pub mod grushin;
pub mod numerics;
pub mod pseudospectrum;
pub mod quasimode;
pub mod random_weyl;
pub mod rng;
pub mod stats;
pub mod symbol;
pub mod zero_count;

pub use error::{Error, ErrorCategory, Result};
pub use num_complex::Complex64 as c64;
