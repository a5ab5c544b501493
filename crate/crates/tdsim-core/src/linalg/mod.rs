//! Dense complex linear algebra: the universal operator carrier, tensor and
//! register manipulation, eigendecomposition/SVD, and the exact
//! trace-distance oracle every algorithm in the crate is tested against.
//!
//! Conventions used throughout:
//! * qubit 0 is the most significant bit of a basis index, so
//!   `tensor(A, B)` places `A` on the more significant qubits;
//! * eigenvalues and singular values are reported in descending order with
//!   ties broken by original index;
//! * predicates use [`crate::config::PREDICATE_TOL`], reconstruction
//!   residuals [`crate::config::RECONSTRUCTION_TOL`].

mod density;
mod operator;
mod spectral;

pub use density::{
    rank_delta, trace_distance_exact, w_small_eigen, DensityOperator,
};
pub use operator::{partial_trace, Operator};
pub use spectral::{
    eigh, hermitian_eigenvalues, hermitian_function, sqrt_psd, svd, SpectralDecomposition,
};
