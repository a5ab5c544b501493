use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::config::PREDICATE_TOL;
use crate::error::{Error, Result};
use crate::linalg::Operator;

/// Eigendecomposition of a Hermitian operator: `A = V diag(lambda) V^dag`
/// with real eigenvalues in descending order (ties broken by original
/// index) and eigenvectors as the columns of a unitary.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Operator,
}

impl SpectralDecomposition {
    /// `V f(diag) V^dag` for a scalar function applied to the spectrum.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> Operator {
        let d = self.eigenvalues.len();
        let v = self.eigenvectors.matrix();
        let diag = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                Complex64::new(f(self.eigenvalues[i]), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Operator::from_matrix(v * diag * v.adjoint()).expect("square by construction")
    }

    pub fn reconstruct(&self) -> Operator {
        self.apply(|x| x)
    }

    /// Reconstruction residual in operator norm.
    pub fn residual(&self, a: &Operator) -> f64 {
        self.reconstruct()
            .sub(a)
            .map(|d| d.op_norm())
            .unwrap_or(f64::INFINITY)
    }
}

/// Hermitian eigendecomposition. The input is symmetrized before
/// factorization so predicates at `PREDICATE_TOL` stay meaningful.
pub fn eigh(a: &Operator) -> Result<SpectralDecomposition> {
    if !a.is_hermitian(PREDICATE_TOL) {
        return Err(Error::Argument(
            "eigendecomposition requires a Hermitian operator".into(),
        ));
    }
    let herm = (a.matrix() + a.matrix().adjoint()) * Complex64::new(0.5, 0.0);
    let se = herm.symmetric_eigen();
    let d = a.dim();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| {
        se.eigenvalues[j]
            .partial_cmp(&se.eigenvalues[i])
            .unwrap()
            .then(i.cmp(&j))
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(d, d, |r, c| se.eigenvectors[(r, order[c])]);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors: Operator::from_matrix(vectors)?,
    })
}

/// Eigenvalues only, descending.
pub fn hermitian_eigenvalues(a: &Operator) -> Result<Vec<f64>> {
    if !a.is_hermitian(PREDICATE_TOL) {
        return Err(Error::Argument(
            "eigenvalues requested for a non-Hermitian operator".into(),
        ));
    }
    let herm = (a.matrix() + a.matrix().adjoint()) * Complex64::new(0.5, 0.0);
    let mut vals: Vec<f64> = herm.symmetric_eigenvalues().iter().cloned().collect();
    vals.sort_by(|x, y| y.partial_cmp(x).unwrap());
    Ok(vals)
}

/// Singular value decomposition `A = W diag(sigma) V^dag` with singular
/// values descending. Total function on finite operators.
pub fn svd(a: &Operator) -> (Operator, Vec<f64>, Operator) {
    let f = a.matrix().clone().svd(true, true);
    let u = f.u.expect("requested U");
    let v_t = f.v_t.expect("requested V^T");
    let d = a.dim();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| {
        f.singular_values[j]
            .partial_cmp(&f.singular_values[i])
            .unwrap()
            .then(i.cmp(&j))
    });
    let sigma: Vec<f64> = order.iter().map(|&i| f.singular_values[i]).collect();
    let w = DMatrix::from_fn(d, d, |r, c| u[(r, order[c])]);
    // columns of V are the conjugated rows of V^dag
    let v = DMatrix::from_fn(d, d, |r, c| v_t[(order[c], r)].conj());
    (
        Operator::from_matrix(w).expect("square"),
        sigma,
        Operator::from_matrix(v).expect("square"),
    )
}

/// Matrix function of a Hermitian operator via its eigenbasis.
pub fn hermitian_function(a: &Operator, f: impl Fn(f64) -> f64) -> Result<Operator> {
    Ok(eigh(a)?.apply(f))
}

/// Principal square root of a positive semidefinite operator; eigenvalues
/// within tolerance below zero are clamped to zero.
pub fn sqrt_psd(a: &Operator) -> Result<Operator> {
    hermitian_function(a, |x| x.max(0.0).sqrt())
}
