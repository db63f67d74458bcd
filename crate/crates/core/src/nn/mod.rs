//! Minimal reverse-mode automatic differentiation over dense matrices,
//! plus the optimizer and gradient checker shared by both neural models.
//!
//! The computation graph is an append-only tape ([`tape::Tape`]); creation
//! order is a topological order, so the backward pass is a single reverse
//! sweep and cycles cannot be constructed. Arrays are dense throughout;
//! sparsity is exploited upstream, when shift operators are applied.

mod adam;
mod gradcheck;
mod init;
mod tape;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::grad_check;
pub use init::{gaussian_matrix, gaussian_vector, INIT_STD};
pub use tape::{Tape, Var};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("empty index set in masked reduction")]
    EmptyMask,
    #[error("backward requires a 1x1 scalar output, got {rows}x{cols}")]
    NonScalarOutput { rows: usize, cols: usize },
}

/// Soft-thresholding with threshold `|tau|`:
/// `sign(x) * max(|x| - |tau|, 0)`.
///
/// Odd in `x` exactly (floating-point negation is exact), which is what
/// makes the recurrent architecture orientation-equivariant.
pub fn soft_threshold_scalar(x: f64, tau: f64) -> f64 {
    let t = tau.abs();
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Elementwise soft-thresholding of a vector.
pub fn soft_threshold(x: &DVector<f64>, tau: f64) -> DVector<f64> {
    x.map(|v| soft_threshold_scalar(v, tau))
}

/// Elementwise soft-thresholding of a matrix.
pub fn soft_threshold_mat(x: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    x.map(|v| soft_threshold_scalar(v, tau))
}
