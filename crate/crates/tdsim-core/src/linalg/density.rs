use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{PREDICATE_TOL, RANK_TOL};
use crate::error::{Error, Result};
use crate::linalg::spectral::hermitian_eigenvalues;
use crate::linalg::Operator;

/// Hermitian positive-semidefinite operator with trace at most one
/// (subnormalized) or equal to one (normalized), on `n` qubits.
#[derive(Clone, Debug, Serialize)]
pub struct DensityOperator {
    op: Operator,
    n: usize,
    normalized: bool,
}

impl<'de> Deserialize<'de> for DensityOperator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            op: Operator,
            #[allow(dead_code)]
            n: usize,
            normalized: bool,
        }
        let raw = Raw::deserialize(d)?;
        DensityOperator::new(raw.op, raw.normalized).map_err(serde::de::Error::custom)
    }
}

impl DensityOperator {
    pub fn new(op: Operator, normalized: bool) -> Result<Self> {
        let n = op.qubits()?;
        if !op.is_hermitian(PREDICATE_TOL) {
            return Err(Error::Validation("density operator not Hermitian".into()));
        }
        let eigs = hermitian_eigenvalues(&op)?;
        if eigs.iter().any(|&l| l < -PREDICATE_TOL) {
            return Err(Error::Validation(format!(
                "density operator has negative eigenvalue {:.3e}",
                eigs.iter().cloned().fold(f64::INFINITY, f64::min)
            )));
        }
        let tr = op.trace().re;
        if tr > 1.0 + PREDICATE_TOL {
            return Err(Error::Validation(format!("trace {tr} exceeds one")));
        }
        if normalized && (tr - 1.0).abs() > PREDICATE_TOL {
            return Err(Error::Validation(format!(
                "normalized density operator has trace {tr}"
            )));
        }
        Ok(Self { op, n, normalized })
    }

    /// Pure state |psi><psi| from an (unnormalized) amplitude vector.
    pub fn from_pure(psi: &[Complex64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < RANK_TOL {
            return Err(Error::Argument("zero state vector".into()));
        }
        let scaled: Vec<Complex64> = psi.iter().map(|z| z / norm).collect();
        Self::new(Operator::outer(&scaled, &scaled)?, true)
    }

    pub fn basis_state(n: usize, i: usize) -> Result<Self> {
        Self::new(Operator::basis_projector(1 << n, i), true)
    }

    pub fn maximally_mixed(n: usize) -> Self {
        let d = 1 << n;
        Self {
            op: Operator::identity(d).scale_re(1.0 / d as f64),
            n,
            normalized: true,
        }
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    /// Eigenvalues, descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.op).expect("validated Hermitian")
    }

    /// Number of eigenvalues above the rank cutoff.
    pub fn rank(&self) -> usize {
        self.eigenvalues().iter().filter(|&&l| l > RANK_TOL).count()
    }

    pub fn purity(&self) -> f64 {
        self.op.mul(&self.op).expect("same dim").trace().re
    }
}

/// Exact trace distance `T = tr|rho - sigma| / 2`, computed as half the sum
/// of absolute eigenvalues of the difference.
pub fn trace_distance_exact(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Dimension(format!(
            "state dimensions differ: {} vs {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    let diff = rho.op().sub(sigma.op())?;
    let eigs = hermitian_eigenvalues(&diff)?;
    let t = eigs.iter().map(|l| l.abs()).sum::<f64>() / 2.0;
    Ok(t.clamp(0.0, 1.0))
}

/// Sum of absolute eigenvalues of a Hermitian operator not greater than
/// `delta`.
pub fn w_small_eigen(a: &Operator, delta: f64) -> Result<f64> {
    if delta < 0.0 {
        return Err(Error::Argument("delta must be non-negative".into()));
    }
    let eigs = hermitian_eigenvalues(a)?;
    Ok(eigs
        .iter()
        .map(|l| l.abs())
        .filter(|&l| l <= delta)
        .sum())
}

/// Number of eigenvalues of a Hermitian operator exceeding `delta` in
/// magnitude.
pub fn rank_delta(a: &Operator, delta: f64) -> Result<usize> {
    if delta < 0.0 {
        return Err(Error::Argument("delta must be non-negative".into()));
    }
    let eigs = hermitian_eigenvalues(a)?;
    Ok(eigs.iter().filter(|l| l.abs() > delta).count())
}
