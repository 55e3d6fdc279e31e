//! Monotonicity-based regularization for shape reconstruction in 2D inverse
//! medium scattering.
//!
//! The crate simulates far-field matrices of penetrable scatterers, builds the
//! Born sensitivity matrices of a pixel grid, computes monotonicity bounds for
//! each pixel, and minimizes the regularized spectral objective over the
//! resulting box. Tikhonov and factorization-method baselines are included
//! for comparison.

pub mod error;
pub mod linalg;
pub mod special;
pub mod geometry;
pub mod forward;
pub mod born;
pub mod monotonicity;
pub mod reconstruct;
pub mod config;
pub mod io;
pub mod pipeline;
pub mod selftest;

pub use error::{Error, Result};
