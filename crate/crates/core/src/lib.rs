//! Reconstruction of dynamic-MRI image series from undersampled (k,t)-space
//! data with a kernel bi-linear model on a navigator manifold.
//!
//! The pipeline is:
//!
//! 1. extract navigator lines from the acquired k-space ([`datamodel`]),
//! 2. pick landmark frames by farthest-first traversal ([`landmarks`]),
//! 3. build the complex kernel Gram matrix of the landmarks ([`kernels`]),
//! 4. learn affine tangent-space weights and compress the kernel ([`manifold`]),
//! 5. solve the bi-linear inverse problem by successive convex
//!    approximation ([`recon`]).
//!
//! [`acquisition`] provides a synthetic periodic phantom and Cartesian
//! sampling masks, [`metrics`] the NRMSE evaluation and zero-filled baseline.

// Negated comparisons deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod cli;
pub mod config;
pub mod datamodel;
pub mod error;
pub mod kernels;
pub mod landmarks;
pub mod manifold;
pub mod metrics;
pub mod numerics;
pub mod recon;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Dense complex matrix, column-major.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<Complex64>;
