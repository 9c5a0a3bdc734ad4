//! Simulation core for a two-node quantum-memory entanglement link.
//!
//! The state engine in [`quantum`] is generic over the real scalar; the node
//! models, detection and estimators work in `f64` through the aliases below.

// Range checks are written `!(x >= lo)` so that NaN fails them, and the
// linear algebra indexes several arrays in step.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod constants;
pub mod detection;
pub mod error;
pub mod estimators;
pub mod link;
pub mod memory_a;
pub mod memory_b;
pub mod quantum;
pub mod scalar;
pub mod source;

pub use error::{EstimateError, QuantumError};
pub use scalar::Real;

pub type Matrix = quantum::Matrix<f64>;
pub type DensityMatrix = quantum::DensityMatrix<f64>;
pub type Observable = quantum::Observable<f64>;
pub type KrausChannel = quantum::KrausChannel<f64>;
pub type Complex = num_complex::Complex<f64>;
