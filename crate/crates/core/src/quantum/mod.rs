//! Finite-dimensional state engine: density matrices, observables, Kraus maps
//! and the truncated two-mode Fock space every node model is written in.

pub mod fock;
pub mod matrix;
pub mod state;

pub use fock::{port_map, FockPair};
pub use matrix::{psd_factor, Matrix, SparseOp};
pub use state::{
    apply_channel, expectation, sample_branch, sample_measurement, tensor, DensityMatrix, KrausChannel, Observable, Outcome,
    Tensor,
};
