//! Numerical spectral analysis of PT-symmetric operator families.
//!
//! The crate discretizes one-dimensional complex Schrödinger families
//! `H(ε) = p² + V + εW` (finite differences or a Hermite-function basis) and
//! explicit matrix triples `(H₀, W, P)`, then computes spectra and
//! multiplicities, contour spectral projections and stability verdicts,
//! numerical ranges, Rayleigh–Schrödinger coefficients, ε-tracked eigenvalue
//! branches and exceptional points.
//!
//! Module map:
//!
//! * [`potentials`] – parity-typed potentials, operator families, the scenario catalog.
//! * [`discretize`] – grids, oscillator basis, parity matrices, PT residuals.
//! * [`eigensolve`] – dense eigendecomposition, multiplicities, parity and reality verdicts.
//! * [`stability`] – contour projections, stability checks, numerical ranges.
//! * [`perturbation`] – branch tracking, perturbation series, exceptional points.
//! * [`cli`] – JSON configs, task dispatch and result files.
//! * [`verify`] – the acceptance suite shared by the `verify` command and the test target.

pub mod cli;
pub mod discretize;
pub mod eigensolve;
pub mod linalg;
pub mod perturbation;
pub mod potentials;
pub mod stability;
pub mod tridiag;
pub mod verify;

mod error;

pub use error::{Error, Result};
pub use faer::c64;
pub use linalg::{CMat, RMat};
