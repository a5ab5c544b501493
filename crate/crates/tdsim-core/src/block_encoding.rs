//! Block-encodings and the machinery that builds and combines them:
//! purification oracles, density-operator encodings, state-preparation
//! pairs, linear combination, and products.
//!
//! A unitary `U` on `n + a` qubits is an `(alpha, a, eps)`-block-encoding of
//! an `n`-qubit operator `A` when `|| alpha <0|_a U |0>_a - A || <= eps`.
//! Ancilla qubits are always the most significant, so the encoded block is
//! the top-left corner of `U`; every constructor here prepends new ancillas.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::PREDICATE_TOL;
use crate::error::{Error, Result};
use crate::estimators::CostMap;
use crate::linalg::{eigh, partial_trace, DensityOperator, Operator};

/// A unitary together with its `(alpha, a, eps)` encoding metadata, a
/// provenance label, and the per-use query cost it charges to the ledger.
#[derive(Clone, Debug)]
pub struct BlockEncoding {
    u: Operator,
    alpha: f64,
    ancillas: usize,
    eps: f64,
    system_qubits: usize,
    provenance: String,
    per_use: CostMap,
}

/// Metadata serialization: operator schema plus the encoding parameters.
#[derive(Serialize, Deserialize)]
pub struct BlockEncodingJson {
    #[serde(flatten)]
    pub operator: Operator,
    pub alpha: f64,
    pub ancillas: usize,
    pub eps: f64,
    pub system_qubits: usize,
}

impl BlockEncoding {
    pub fn new(
        u: Operator,
        alpha: f64,
        ancillas: usize,
        eps: f64,
        system_qubits: usize,
        provenance: impl Into<String>,
        per_use: CostMap,
    ) -> Result<Self> {
        if alpha < 0.0 || eps < 0.0 {
            return Err(Error::Argument("alpha and eps must be non-negative".into()));
        }
        if u.dim() != 1usize << (system_qubits + ancillas) {
            return Err(Error::Dimension(format!(
                "encoding dimension {} does not match {} system + {} ancilla qubits",
                u.dim(),
                system_qubits,
                ancillas
            )));
        }
        if !u.is_unitary(PREDICATE_TOL) {
            return Err(Error::Validation(
                "block-encoding operator not unitary".into(),
            ));
        }
        Ok(Self {
            u,
            alpha,
            ancillas,
            eps,
            system_qubits,
            provenance: provenance.into(),
            per_use,
        })
    }

    pub fn unitary(&self) -> &Operator {
        &self.u
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn ancillas(&self) -> usize {
        self.ancillas
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn system_qubits(&self) -> usize {
        self.system_qubits
    }

    pub fn system_dim(&self) -> usize {
        1 << self.system_qubits
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn per_use(&self) -> &CostMap {
        &self.per_use
    }

    /// Register a ledger counter charged once per use of this encoding.
    pub fn with_self_counter(mut self, label: &str) -> Self {
        self.per_use.inc(label, 1);
        self
    }

    /// `<0|_a U |0>_a`: the bare top-left block.
    pub fn raw_block(&self) -> Operator {
        self.u
            .top_left_block(self.system_dim(), 1.0)
            .expect("block within encoding")
    }

    /// `alpha <0|_a U |0>_a`: the operator this encoding represents.
    pub fn encoded_operator(&self) -> Operator {
        self.u
            .top_left_block(self.system_dim(), self.alpha)
            .expect("block within encoding")
    }

    /// Pad with extra ancilla qubits (prepended); the encoded block is
    /// unchanged.
    pub fn pad_ancillas(&self, extra: usize) -> Result<Self> {
        if extra == 0 {
            return Ok(self.clone());
        }
        let u = Operator::identity(1 << extra).tensor(&self.u)?;
        Self::new(
            u,
            self.alpha,
            self.ancillas + extra,
            self.eps,
            self.system_qubits,
            self.provenance.clone(),
            self.per_use.clone(),
        )
    }
}

/// Residual `|| alpha <0|_a B |0>_a - A ||` in operator norm.
pub fn verify_block_encoding(b: &BlockEncoding, a: &Operator) -> Result<f64> {
    if a.dim() != b.system_dim() {
        return Err(Error::Dimension(format!(
            "target dimension {} does not match encoded system dimension {}",
            a.dim(),
            b.system_dim()
        )));
    }
    Ok(b.encoded_operator().sub(a)?.op_norm())
}

/// Whether the measured residual stays within the declared budget (plus the
/// predicate tolerance that absorbs floating-point noise).
pub fn block_encoding_passes(b: &BlockEncoding, a: &Operator) -> Result<bool> {
    Ok(verify_block_encoding(b, a)? <= b.eps + PREDICATE_TOL)
}

/// Unitary oracle preparing a purification of a density operator: the state
/// `O |0...0>` on `n + n_anc` qubits (system most significant) traces down
/// to the declared state on the system register.
#[derive(Clone, Debug)]
pub struct PurifiedOracle {
    o: Operator,
    n: usize,
    n_anc: usize,
    label: String,
    per_use: CostMap,
}

impl PurifiedOracle {
    pub fn new(o: Operator, n: usize, n_anc: usize, label: impl Into<String>) -> Result<Self> {
        if o.dim() != 1usize << (n + n_anc) {
            return Err(Error::Dimension(
                "oracle dimension does not match qubit counts".into(),
            ));
        }
        if !o.is_unitary(PREDICATE_TOL) {
            return Err(Error::Validation("purification oracle not unitary".into()));
        }
        let label = label.into();
        let per_use = CostMap::single(&label, 1);
        Ok(Self {
            o,
            n,
            n_anc,
            label,
            per_use,
        })
    }

    pub fn operator(&self) -> &Operator {
        &self.o
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_anc(&self) -> usize {
        self.n_anc
    }

    pub fn total_qubits(&self) -> usize {
        self.n + self.n_anc
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn per_use(&self) -> &CostMap {
        &self.per_use
    }

    /// Amplitudes of `O |0...0>`.
    pub fn prepared_state(&self) -> Vec<Complex64> {
        let d = self.o.dim();
        (0..d).map(|i| self.o.at(i, 0)).collect()
    }

    /// The density operator obtained by tracing out the ancilla register.
    pub fn reduced_state(&self) -> Result<DensityOperator> {
        let psi = self.prepared_state();
        let full = Operator::outer(&psi, &psi)?;
        let keep: Vec<usize> = (0..self.n).collect();
        DensityOperator::new(partial_trace(&full, &keep)?, true)
    }

    /// Round-trip residual against a target state, max-entry norm.
    pub fn verify(&self, rho: &DensityOperator) -> Result<f64> {
        Ok(self.reduced_state()?.op().max_abs_diff(rho.op()))
    }
}

/// Pair of unitaries whose first-column amplitudes encode the coefficients
/// of a linear combination: `(beta, b, eps1)`-state-preparation-pair for a
/// target coefficient vector `y`.
#[derive(Clone, Debug)]
pub struct StatePrepPair {
    pub p_l: Operator,
    pub p_r: Operator,
    pub beta: f64,
    pub b: usize,
    pub eps1: f64,
}

impl StatePrepPair {
    /// The `(HX, H)` pair: a `(2, 1, 0)`-state-preparation-pair for
    /// `y = (1, -1)`, which drives the difference combination.
    pub fn difference_pair() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = Operator::from_fn(2, |i, j| {
            let v = if i == 1 && j == 1 { -s } else { s };
            Complex64::new(v, 0.0)
        });
        let hx = Operator::from_fn(2, |i, j| {
            let v = match (i, j) {
                (1, 0) => -s,
                _ => s,
            };
            Complex64::new(v, 0.0)
        });
        Self {
            p_l: hx,
            p_r: h,
            beta: 2.0,
            b: 1,
            eps1: 0.0,
        }
    }

    /// `sum_j |beta conj(c_j) d_j - y_j|` for the declared target vector.
    pub fn residual(&self, y: &[Complex64]) -> f64 {
        let dim = self.p_l.dim();
        (0..dim)
            .map(|j| {
                let c = self.p_l.at(j, 0);
                let d = self.p_r.at(j, 0);
                let target = y.get(j).copied().unwrap_or(Complex64::new(0.0, 0.0));
                (c.conj() * d * self.beta - target).norm()
            })
            .sum()
    }
}

/// Error composition of the linear-combination construction: a
/// `(beta, b, eps1)` pair applied to `(alpha, a, eps2)` encodings yields an
/// `(alpha*beta, a+b, alpha*eps1 + alpha*beta*eps2)` encoding of the
/// combination.
pub fn lcu_composed_eps(alpha: f64, beta: f64, eps1: f64, eps2: f64) -> f64 {
    alpha * eps1 + alpha * beta * eps2
}

/// Build a purification oracle for a normalized state. The ancilla register
/// holds `max(1, ceil(log2 rank))` qubits; the prepared column is
/// `sum_j sqrt(lambda_j) |psi_j>|j>` and the remaining columns are completed
/// by Gram-Schmidt over the standard basis with largest-residual pivoting.
pub fn purify(rho: &DensityOperator, label: &str) -> Result<PurifiedOracle> {
    if !rho.normalized() {
        return Err(Error::Argument(
            "purification requires a normalized state".into(),
        ));
    }
    let n = rho.n();
    let dec = eigh(rho.op())?;
    let rank = dec
        .eigenvalues
        .iter()
        .filter(|&&l| l > crate::config::RANK_TOL)
        .count()
        .max(1);
    let n_anc = usize::max(1, rank.next_power_of_two().trailing_zeros() as usize);
    let anc_dim = 1usize << n_anc;
    let sys_dim = rho.dim();
    let full_dim = sys_dim * anc_dim;

    // |rho> = sum_j sqrt(lambda_j) |psi_j> (x) |j>, system most significant
    let mut column = vec![Complex64::new(0.0, 0.0); full_dim];
    for j in 0..rank.min(anc_dim) {
        let l = dec.eigenvalues[j].max(0.0);
        let amp = l.sqrt();
        for s in 0..sys_dim {
            column[s * anc_dim + j] += dec.eigenvectors.at(s, j) * Complex64::new(amp, 0.0);
        }
    }
    let o = complete_to_unitary(&column, full_dim)?;
    PurifiedOracle::new(o, n, n_anc, label)
}

/// Complete a unit-norm column to a unitary whose column 0 is that vector.
/// Deterministic: remaining columns come from Gram-Schmidt over the standard
/// basis, picking at each step the candidate with the largest residual norm.
fn complete_to_unitary(first_column: &[Complex64], dim: usize) -> Result<Operator> {
    let norm: f64 = first_column
        .iter()
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        .sqrt();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::Argument(format!(
            "completion column has norm {norm}, expected 1"
        )));
    }
    let mut columns: Vec<Vec<Complex64>> = Vec::with_capacity(dim);
    columns.push(first_column.iter().map(|z| z / norm).collect());

    // residuals[i] = e_i orthogonalized against accepted columns
    let mut residuals: Vec<Vec<Complex64>> = (0..dim)
        .map(|i| {
            let mut e = vec![Complex64::new(0.0, 0.0); dim];
            e[i] = Complex64::new(1.0, 0.0);
            e
        })
        .collect();
    let project_out = |col: &[Complex64], r: &mut Vec<Complex64>| {
        let inner: Complex64 = col.iter().zip(r.iter()).map(|(c, x)| c.conj() * x).sum();
        for (ri, ci) in r.iter_mut().zip(col.iter()) {
            *ri -= inner * ci;
        }
    };
    for r in residuals.iter_mut() {
        project_out(&columns[0], r);
    }

    while columns.len() < dim {
        let (best, best_norm) = residuals
            .iter()
            .enumerate()
            .map(|(i, r)| (i, r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()))
            .fold((usize::MAX, -1.0), |acc, (i, n)| {
                if n > acc.1 {
                    (i, n)
                } else {
                    acc
                }
            });
        if best_norm < 1e-9 {
            return Err(Error::Construction(
                "unitary completion ran out of independent directions".into(),
            ));
        }
        let new_col: Vec<Complex64> = residuals[best]
            .iter()
            .map(|z| z / Complex64::new(best_norm, 0.0))
            .collect();
        for r in residuals.iter_mut() {
            project_out(&new_col, r);
        }
        columns.push(new_col);
    }

    Ok(Operator::from_fn(dim, |i, j| columns[j][i]))
}

/// Unitary block-encoding of the state a purification oracle prepares:
/// a `(1, n + n_anc, 0)`-block-encoding using one query to the oracle and
/// one to its adjoint (two ledger queries per use).
pub fn density_to_block_encoding(oracle: &PurifiedOracle) -> Result<BlockEncoding> {
    let n = oracle.n();
    let b = oracle.n_anc();
    let sys = Operator::identity(1 << n);
    let o_emb = oracle.operator().tensor(&sys)?;
    let swap = Operator::swap_outer_registers(n, b)?;
    let w = o_emb.adjoint().mul(&swap)?.mul(&o_emb)?;
    BlockEncoding::new(
        w,
        1.0,
        n + b,
        0.0,
        n,
        format!("density-to-block-encoding({})", oracle.label()),
        oracle.per_use().scaled(2),
    )
}

/// Block-encoding of `nu = (A_rho - A_sigma) / 2` from encodings of the two
/// operators, via the `(HX, H)` state-preparation pair. Inputs must share
/// the system size and the same `alpha`; ancilla registers are padded to a
/// common width and one selector qubit is prepended.
pub fn lcu_difference(be_rho: &BlockEncoding, be_sigma: &BlockEncoding) -> Result<BlockEncoding> {
    if be_rho.system_qubits() != be_sigma.system_qubits() {
        return Err(Error::Dimension(
            "lcu difference requires matching system registers".into(),
        ));
    }
    if (be_rho.alpha() - be_sigma.alpha()).abs() > PREDICATE_TOL {
        return Err(Error::Argument(format!(
            "lcu difference requires matched alpha, got {} and {}",
            be_rho.alpha(),
            be_sigma.alpha()
        )));
    }
    let a = be_rho.ancillas().max(be_sigma.ancillas());
    let u_rho = be_rho.pad_ancillas(a - be_rho.ancillas())?;
    let u_sigma = be_sigma.pad_ancillas(a - be_sigma.ancillas())?;

    let pair = StatePrepPair::difference_pair();
    let inner_dim = u_rho.unitary().dim();
    // selector: |0><0| (x) U_rho + |1><1| (x) U_sigma
    let mut sel = Operator::zeros(2 * inner_dim);
    for i in 0..inner_dim {
        for j in 0..inner_dim {
            sel.set(i, j, u_rho.unitary().at(i, j));
            sel.set(inner_dim + i, inner_dim + j, u_sigma.unitary().at(i, j));
        }
    }
    let inner_id = Operator::identity(inner_dim);
    let left = pair.p_l.adjoint().tensor(&inner_id)?;
    let right = pair.p_r.tensor(&inner_id)?;
    let u_nu = left.mul(&sel)?.mul(&right)?;

    // The theorem composes budgets for the (rho - sigma) claim at
    // alpha*beta; dividing the claim by beta = 2 halves both.
    let eps2 = be_rho.eps().max(be_sigma.eps());
    let composed = lcu_composed_eps(be_rho.alpha(), pair.beta, pair.eps1, eps2);
    let mut per_use = u_rho.per_use().clone();
    per_use.add(u_sigma.per_use());
    BlockEncoding::new(
        u_nu,
        be_rho.alpha(),
        a + pair.b,
        composed / 2.0,
        be_rho.system_qubits(),
        "lcu-difference",
        per_use,
    )
}

/// Block-encoding of the product `AB` from encodings of `A` and `B`:
/// `(alpha*beta, a+b, alpha*eps_B + beta*eps_A)`, one query to each input.
pub fn product_block_encodings(
    be_a: &BlockEncoding,
    be_b: &BlockEncoding,
) -> Result<BlockEncoding> {
    if be_a.system_qubits() != be_b.system_qubits() {
        return Err(Error::Dimension(
            "product requires matching system registers".into(),
        ));
    }
    let n = be_a.system_qubits();
    let a = be_a.ancillas();
    let b = be_b.ancillas();
    let total = a + b + n;
    let targets_a: Vec<usize> = (0..a).chain(a + b..total).collect();
    let targets_b: Vec<usize> = (a..a + b).chain(a + b..total).collect();
    let ua = be_a.unitary().embed(&targets_a, total)?;
    let ub = be_b.unitary().embed(&targets_b, total)?;
    let mut per_use = be_a.per_use().clone();
    per_use.add(be_b.per_use());
    BlockEncoding::new(
        ua.mul(&ub)?,
        be_a.alpha() * be_b.alpha(),
        a + b,
        be_a.alpha() * be_b.eps() + be_b.alpha() * be_a.eps(),
        n,
        "product",
        per_use,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn purify_pure_state_prepares_basis_column() {
        let rho = DensityOperator::basis_state(1, 0).unwrap();
        let oracle = purify(&rho, "O_rho").unwrap();
        let psi = oracle.prepared_state();
        assert!((psi[0].norm() - 1.0).abs() < 1e-12);
        for z in &psi[1..] {
            assert!(z.norm() < 1e-12);
        }
    }

    #[test]
    fn purify_maximally_mixed_round_trips() {
        let rho = DensityOperator::maximally_mixed(1);
        let oracle = purify(&rho, "O_rho").unwrap();
        assert!(oracle.verify(&rho).unwrap() < 1e-10);
        assert_eq!(oracle.n_anc(), 1);
    }

    #[test]
    fn purify_rejects_subnormalized() {
        let op = Operator::from_diag_real(&[0.5, 0.25]);
        let rho = DensityOperator::new(op, false).unwrap();
        assert!(purify(&rho, "O").is_err());
    }

    #[test]
    fn density_encoding_of_basis_state_is_exact() {
        let rho = DensityOperator::basis_state(1, 0).unwrap();
        let be = density_to_block_encoding(&purify(&rho, "O_rho").unwrap()).unwrap();
        assert_eq!(be.alpha(), 1.0);
        let res = verify_block_encoding(&be, rho.op()).unwrap();
        assert!(res < 1e-12, "residual {res}");
    }

    #[test]
    fn density_encoding_of_maximally_mixed() {
        let rho = DensityOperator::maximally_mixed(1);
        let be = density_to_block_encoding(&purify(&rho, "O_rho").unwrap()).unwrap();
        assert!(verify_block_encoding(&be, rho.op()).unwrap() < 1e-10);
    }

    #[test]
    fn density_encoding_charges_two_queries() {
        let rho = DensityOperator::maximally_mixed(1);
        let be = density_to_block_encoding(&purify(&rho, "O_rho").unwrap()).unwrap();
        assert_eq!(be.per_use().get("O_rho"), 2);
    }

    #[test]
    fn difference_pair_hits_target_vector() {
        let pair = StatePrepPair::difference_pair();
        let y = [Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)];
        assert!(pair.residual(&y) < 1e-12);
        assert!(pair.p_l.is_unitary(1e-12));
        assert!(pair.p_r.is_unitary(1e-12));
    }

    #[test]
    fn lcu_of_equal_states_encodes_zero() {
        let rho = DensityOperator::maximally_mixed(1);
        let be = density_to_block_encoding(&purify(&rho, "O_rho").unwrap()).unwrap();
        let nu = lcu_difference(&be, &be).unwrap();
        assert!(nu.encoded_operator().op_norm() < 1e-10);
    }

    #[test]
    fn lcu_of_orthogonal_basis_states_encodes_half_z() {
        let r0 = DensityOperator::basis_state(1, 0).unwrap();
        let r1 = DensityOperator::basis_state(1, 1).unwrap();
        let b0 = density_to_block_encoding(&purify(&r0, "O_rho").unwrap()).unwrap();
        let b1 = density_to_block_encoding(&purify(&r1, "O_sigma").unwrap()).unwrap();
        let nu = lcu_difference(&b0, &b1).unwrap();
        let target = Operator::from_diag_real(&[0.5, -0.5]);
        assert!(verify_block_encoding(&nu, &target).unwrap() < 1e-10);
        assert_eq!(nu.ancillas(), b0.ancillas().max(b1.ancillas()) + 1);
    }

    #[test]
    fn product_of_identity_and_projector() {
        let id = BlockEncoding::new(
            Operator::identity(2),
            1.0,
            0,
            0.0,
            1,
            "test",
            CostMap::new(),
        )
        .unwrap();
        let proj = Operator::from_diag_real(&[1.0, 0.0]);
        // dilate diag(1,0) by hand: [[P, Q], [Q, -P]] with Q = diag(0,1)
        let q = Operator::from_diag_real(&[0.0, 1.0]);
        let mut u = Operator::zeros(4);
        for i in 0..2 {
            for j in 0..2 {
                u.set(i, j, proj.at(i, j));
                u.set(i, 2 + j, q.at(i, j));
                u.set(2 + i, j, q.at(i, j));
                u.set(2 + i, 2 + j, -proj.at(i, j));
            }
        }
        let bp = BlockEncoding::new(u, 1.0, 1, 0.0, 1, "test", CostMap::new()).unwrap();
        let prod = product_block_encodings(&id, &bp).unwrap();
        assert!(verify_block_encoding(&prod, &proj).unwrap() < 1e-12);
        let prod2 = product_block_encodings(&bp, &bp).unwrap();
        assert!(verify_block_encoding(&prod2, &proj).unwrap() < 1e-12);
        assert_eq!(prod2.ancillas(), 2);
    }

    #[test]
    fn verify_detects_corruption() {
        let rho = DensityOperator::maximally_mixed(1);
        let be = density_to_block_encoding(&purify(&rho, "O_rho").unwrap()).unwrap();
        let mut bad = be.unitary().clone();
        // swap two columns: still unitary, wrong block
        let d = bad.dim();
        for i in 0..d {
            let a = bad.at(i, 0);
            let b = bad.at(i, 1);
            bad.set(i, 0, b);
            bad.set(i, 1, a);
        }
        let corrupted = BlockEncoding::new(
            bad,
            1.0,
            be.ancillas(),
            0.0,
            1,
            "corrupted",
            CostMap::new(),
        )
        .unwrap();
        let res = verify_block_encoding(&corrupted, rho.op()).unwrap();
        assert!(res > PREDICATE_TOL, "corruption went undetected: {res}");
    }
}
