//! Noisy matrix completion by residual spectral matching.
//!
//! The estimators in this crate pick the completion whose residual matrix
//! looks like a sparse Gaussian random matrix: instead of only minimizing the
//! Frobenius norm of the residual, they minimize a weighted L2 distance
//! between the residual's ordered singular values and the expected spectrum
//! of the sparse Gaussian ensemble, with the noise scale re-estimated from
//! the bulk of the spectrum at every step.
//!
//! Modules:
//! - [`matrix`], [`decomp`]: dense containers, masks, SVD, norms, incoherence.
//! - [`reference`]: sparse Gaussian sampling, Monte Carlo reference spectra,
//!   the Marchenko-Pastur density and the RMT signal-recovery formula.
//! - [`criterion`]: weights, the bulk noise-scale estimator and the spectral
//!   matching loss.
//! - [`solvers`]: pseudo-gradient descent for the factorized and nuclear-norm
//!   spectral matching estimators.
//! - [`baselines`]: Frobenius-norm completion baselines and the rank-s /
//!   soft-threshold / RMT denoisers for fully observed data.
//! - [`experiments`]: simulation designs, error metrics and the benchmark
//!   harness.
//! - [`io`]: matrix/triplet file formats, train/validation/test splitting,
//!   hyperparameter tuning and prediction clipping.

pub mod baselines;
pub mod criterion;
pub mod decomp;
pub mod error;
pub mod experiments;
pub mod io;
pub mod matrix;
pub mod reference;
pub mod seeding;
pub mod solvers;

pub use error::{Error, Result};
pub use matrix::{project_mask, DenseMatrix, ObservationMask};
