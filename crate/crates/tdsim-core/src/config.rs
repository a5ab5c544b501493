//! Numeric tolerances and global constants.
//!
//! All thresholds used by predicates and acceptance checks live here, so no
//! module carries ad-hoc magic numbers.

use std::sync::OnceLock;

/// Tolerance for structural predicates (unitarity, hermiticity, PSD,
/// block-encoding residual pass/fail).
pub const PREDICATE_TOL: f64 = 1e-9;

/// Tolerance for decomposition reconstruction residuals (SVD, eigh).
pub const RECONSTRUCTION_TOL: f64 = 1e-10;

/// Eigenvalues below this magnitude are treated as zero when counting rank.
pub const RANK_TOL: f64 = 1e-12;

/// Default cap on total qubits of any constructed register (4096 x 4096).
pub const DEFAULT_MAX_QUBITS: usize = 12;

/// Degree-bound constant for the sign polynomial: the constructed minimal
/// certified degree satisfies `d <= SIGN_POLY_ETA * ln(1/eps) / delta`.
/// Pinned from measured degrees across the acceptance grid, where the
/// ratio `d * delta / ln(1/eps)` stays in [2.1, 3.1]; the margin keeps the
/// bound stable if the construction changes slightly.
pub const SIGN_POLY_ETA: f64 = 3.5;

/// Query constant of singular value transformation: one transformation of
/// degree `d` charges `QSVT_GAMMA * d` queries to the input encoding,
/// counting both forward and adjoint alternations.
pub const QSVT_GAMMA: u64 = 2;

/// Amplitude-estimation grid constant: estimating a trace to additive error
/// `eps_H` uses an `M`-point phase grid with `M = next_pow2(ceil(QAE_GRID_C
/// / eps_H))`, which makes the worst-case estimation error at most
/// `0.79 * eps_H`.
pub const QAE_GRID_C: f64 = 8.0;

/// Shot constant for the sampling backend: `ceil(SHOTS_C / eps_H^2)`
/// Bernoulli shots per repetition (two standard deviations within `eps_H`).
pub const SHOTS_C: f64 = 4.0;

/// Default odd repetition count for median success amplification.
pub const DEFAULT_MEDIAN_K: usize = 9;

/// Maximum total qubits for any register. Reads `TDSIM_MAX_QUBITS` once.
pub fn max_qubits() -> usize {
    static CAP: OnceLock<usize> = OnceLock::new();
    *CAP.get_or_init(|| {
        std::env::var("TDSIM_MAX_QUBITS")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(DEFAULT_MAX_QUBITS)
    })
}
