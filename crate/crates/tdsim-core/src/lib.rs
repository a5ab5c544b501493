//! Classical desk-scale simulator for quantum trace-distance estimation
//! between low-rank (and approximately low-rank) mixed states.
//!
//! Every quantum subroutine — block-encoding, linear combination of
//! unitaries, singular value transformation by a sign-approximating
//! polynomial, Hadamard tests, amplitude estimation, and the
//! sampling-to-block-encoding channel — is realized as explicit
//! finite-dimensional linear algebra and checked against exact oracles.
//!
//! The two top-level entry points are [`algorithms::estimate_purified`]
//! (purified oracle access) and [`algorithms::estimate_samples`]
//! (identical-copy access); [`fixtures`] generates the state families the
//! estimators are exercised on.

pub mod algorithms;
pub mod block_encoding;
pub mod channels;
pub mod config;
pub mod error;
pub mod estimators;
pub mod fixtures;
pub mod linalg;
pub mod poly_svt;
pub mod rng;

pub use error::{Error, Result};
pub use linalg::{DensityOperator, Operator, SpectralDecomposition};
