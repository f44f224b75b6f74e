//! Numerical toolkit for the finite non-periodic Toda lattice and its
//! pseudo-positive multidimensional generalization on the Klein–Dirac quadric.
//!
//! The crate is organised bottom-up:
//!
//! - [`sphere`]: real orthonormal spherical-harmonic bases on S¹ and S²,
//!   normalized against the probability surface measure, plus quadrature.
//! - [`moment`]: atomic measures, moments, Stieltjes transforms, Lanczos
//!   recurrences, Jacobi matrices, continued fractions and the
//!   Hamburger–Nevanlinna asymptotic check.
//! - [`toda`]: the classical lattice in physical and Flaschka coordinates,
//!   RK4 integration, the Lax pair and Moser's explicit spectral solution.
//! - [`kdq`]: quadric points, the Hua–Aronszajn kernel, Cauchy-type
//!   reproduction, the multidimensional Stieltjes–Markov transform and its
//!   asymptotic expansion.
//! - [`pseudo_toda`]: the per-component isospectral lattice built from a
//!   pseudo-positive measure.
//! - [`iso_flow`]: the Riccati mass flow and the integrability functional.
//! - [`csv`]: plain CSV writing with deterministic float formatting.

pub mod csv;
pub mod error;
pub mod iso_flow;
pub mod kdq;
pub mod moment;
pub mod pseudo_toda;
pub mod sphere;
pub mod toda;

pub use error::{Error, Result};
pub use num_complex::Complex64;
