use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config;
use crate::error::{Error, Result};

/// Dense square complex matrix; the carrier for states, unitaries and
/// block-encodings.
#[derive(Clone, PartialEq)]
pub struct Operator {
    m: DMatrix<Complex64>,
}

/// Wire format: `{"dim": n, "entries": [[re, im], ...]}`, row-major.
#[derive(Serialize, Deserialize)]
struct OperatorJson {
    dim: usize,
    entries: Vec<[f64; 2]>,
}

impl Operator {
    pub fn from_matrix(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "operator must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let op = Self { m };
        if !op.is_finite() {
            return Err(Error::Argument("operator entries must be finite".into()));
        }
        Ok(op)
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            m: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: DMatrix::identity(dim, dim),
        }
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        Self {
            m: DMatrix::from_fn(dim, dim, f),
        }
    }

    pub fn from_diag_real(diag: &[f64]) -> Self {
        Self::from_fn(diag.len(), |i, j| {
            if i == j {
                Complex64::new(diag[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// Projector |i><i| in the computational basis.
    pub fn basis_projector(dim: usize, i: usize) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        m[(i, i)] = Complex64::new(1.0, 0.0);
        Self { m }
    }

    /// Rank-one operator |v><w|.
    pub fn outer(v: &[Complex64], w: &[Complex64]) -> Result<Self> {
        if v.len() != w.len() {
            return Err(Error::Dimension("outer product length mismatch".into()));
        }
        Ok(Self::from_fn(v.len(), |i, j| v[i] * w[j].conj()))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    /// Number of qubits, requiring the dimension to be a power of two.
    pub fn qubits(&self) -> Result<usize> {
        let d = self.dim();
        if !d.is_power_of_two() {
            return Err(Error::Dimension(format!(
                "dimension {d} is not a power of two"
            )));
        }
        Ok(d.trailing_zeros() as usize)
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.m[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.m[(i, j)] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        Self {
            m: self.m.adjoint(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.m.trace()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            m: self.m.clone() * s,
        }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self {
            m: &self.m + &other.m,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self {
            m: &self.m - &other.m,
        })
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self {
            m: &self.m * &other.m,
        })
    }

    /// U A U^dag.
    pub fn conjugate_by(&self, u: &Self) -> Result<Self> {
        Ok(Self {
            m: &u.m * &self.m * u.m.adjoint(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    /// Operator norm (largest singular value).
    pub fn op_norm(&self) -> f64 {
        self.m
            .clone()
            .singular_values()
            .iter()
            .cloned()
            .fold(0.0, f64::max)
    }

    /// Largest entrywise absolute deviation from another operator.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.m - &other.m)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (&self.m - self.m.adjoint()).iter().all(|z| z.norm() <= tol)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let d = self.dim();
        let prod = self.m.adjoint() * &self.m;
        (prod - DMatrix::<Complex64>::identity(d, d))
            .iter()
            .all(|z| z.norm() <= tol)
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        if !self.is_hermitian(tol) {
            return false;
        }
        let herm = (&self.m + self.m.adjoint()) * Complex64::new(0.5, 0.0);
        herm.symmetric_eigenvalues().iter().all(|&l| l >= -tol)
    }

    /// Kronecker product, `self` on the more significant qubits.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let dim = self
            .dim()
            .checked_mul(other.dim())
            .ok_or_else(|| Error::Dimension("tensor dimension overflow".into()))?;
        let cap = config::max_qubits();
        if dim > (1usize << cap) {
            let requested = dim.next_power_of_two().trailing_zeros() as usize;
            return Err(Error::QubitCap { requested, cap });
        }
        Ok(Self {
            m: self.m.kronecker(&other.m),
        })
    }

    /// Controlled version, control qubit prepended (most significant):
    /// `|0><0| (x) I + |1><1| (x) self`.
    pub fn controlled(&self) -> Self {
        let d = self.dim();
        let mut m = DMatrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            m[(i, i)] = Complex64::new(1.0, 0.0);
            for j in 0..d {
                m[(d + i, d + j)] = self.m[(i, j)];
            }
        }
        Self { m }
    }

    /// Embed this operator on the listed qubit positions of a larger
    /// register, identity elsewhere. `targets[k]` is the register position
    /// carrying this operator's qubit `k`; positions use the qubit-0 =
    /// most-significant convention.
    pub fn embed(&self, targets: &[usize], total_qubits: usize) -> Result<Self> {
        let t = self.qubits()?;
        if targets.len() != t {
            return Err(Error::Argument(format!(
                "embed: {} targets for a {}-qubit operator",
                targets.len(),
                t
            )));
        }
        let mut seen = vec![false; total_qubits];
        for &q in targets {
            if q >= total_qubits || seen[q] {
                return Err(Error::Argument(format!(
                    "embed: invalid or repeated target qubit {q}"
                )));
            }
            seen[q] = true;
        }
        let rest: Vec<usize> = (0..total_qubits).filter(|q| !seen[*q]).collect();
        let full_dim = 1usize << total_qubits;
        let small_dim = 1usize << t;
        let rest_dim = 1usize << rest.len();

        let mut m = DMatrix::zeros(full_dim, full_dim);
        for r in 0..rest_dim {
            // assemble the common non-target bits
            let mut base = 0usize;
            for (k, &q) in rest.iter().enumerate() {
                let b = (r >> (rest.len() - 1 - k)) & 1;
                base |= b << (total_qubits - 1 - q);
            }
            for it in 0..small_dim {
                let mut row = base;
                for (k, &q) in targets.iter().enumerate() {
                    row |= ((it >> (t - 1 - k)) & 1) << (total_qubits - 1 - q);
                }
                for jt in 0..small_dim {
                    let v = self.m[(it, jt)];
                    if v == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let mut col = base;
                    for (k, &q) in targets.iter().enumerate() {
                        col |= ((jt >> (t - 1 - k)) & 1) << (total_qubits - 1 - q);
                    }
                    m[(row, col)] = v;
                }
            }
        }
        Ok(Self { m })
    }

    /// Permutation operator sending basis state `|b_0 .. b_{m-1}>` to the
    /// state whose new position `p` carries old bit `perm[p]`.
    pub fn qubit_permutation(total_qubits: usize, perm: &[usize]) -> Result<Self> {
        if perm.len() != total_qubits {
            return Err(Error::Argument("permutation length mismatch".into()));
        }
        let mut seen = vec![false; total_qubits];
        for &p in perm {
            if p >= total_qubits || seen[p] {
                return Err(Error::Argument("invalid qubit permutation".into()));
            }
            seen[p] = true;
        }
        let dim = 1usize << total_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        for src in 0..dim {
            let mut dst = 0usize;
            for (new_pos, &old_pos) in perm.iter().enumerate() {
                let b = (src >> (total_qubits - 1 - old_pos)) & 1;
                dst |= b << (total_qubits - 1 - new_pos);
            }
            m[(dst, src)] = Complex64::new(1.0, 0.0);
        }
        Ok(Self { m })
    }

    /// SWAP of two equal-size registers in an `[A(n) B(b) C(n)]` layout:
    /// `|a,b,c> -> |c,b,a>`.
    pub fn swap_outer_registers(n: usize, b: usize) -> Result<Self> {
        let total = 2 * n + b;
        let mut perm = Vec::with_capacity(total);
        perm.extend(n + b..total); // new A <- old C
        perm.extend(n..n + b); // B fixed
        perm.extend(0..n); // new C <- old A
        Self::qubit_permutation(total, &perm)
    }

    /// Top-left `block_dim x block_dim` corner scaled by `alpha`; with the
    /// ancilla-most-significant convention this is `alpha <0|_a U |0>_a`.
    pub fn top_left_block(&self, block_dim: usize, alpha: f64) -> Result<Self> {
        if block_dim > self.dim() {
            return Err(Error::Dimension("block larger than operator".into()));
        }
        Ok(Self::from_fn(block_dim, |i, j| {
            self.m[(i, j)] * Complex64::new(alpha, 0.0)
        }))
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!(
                "dimension mismatch: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(())
    }
}

impl std::fmt::Debug for Operator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Operator(dim={})", self.dim())
    }
}

impl Serialize for Operator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let d = self.dim();
        let mut entries = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let z = self.m[(i, j)];
                entries.push([z.re, z.im]);
            }
        }
        OperatorJson { dim: d, entries }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Operator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let json = OperatorJson::deserialize(d)?;
        if json.entries.len() != json.dim * json.dim {
            return Err(serde::de::Error::custom(format!(
                "expected {} entries for dim {}, got {}",
                json.dim * json.dim,
                json.dim,
                json.entries.len()
            )));
        }
        let dim = json.dim;
        let op = Operator::from_fn(dim, |i, j| {
            let [re, im] = json.entries[i * dim + j];
            Complex64::new(re, im)
        });
        if !op.is_finite() {
            return Err(serde::de::Error::custom("non-finite operator entry"));
        }
        Ok(op)
    }
}

/// Partial trace keeping the listed qubit positions (ascending original
/// order preserved in the output register).
pub fn partial_trace(a: &Operator, keep: &[usize]) -> Result<Operator> {
    let total = a.qubits()?;
    let mut sorted = keep.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != keep.len() || sorted.iter().any(|&q| q >= total) {
        return Err(Error::Argument(format!(
            "invalid keep set {keep:?} for {total} qubits"
        )));
    }
    let traced: Vec<usize> = (0..total).filter(|q| !sorted.contains(q)).collect();
    let kd = 1usize << sorted.len();
    let td = 1usize << traced.len();

    let compose = |kept_bits: usize, traced_bits: usize| -> usize {
        let mut idx = 0usize;
        for (k, &q) in sorted.iter().enumerate() {
            let b = (kept_bits >> (sorted.len() - 1 - k)) & 1;
            idx |= b << (total - 1 - q);
        }
        for (k, &q) in traced.iter().enumerate() {
            let b = (traced_bits >> (traced.len() - 1 - k)) & 1;
            idx |= b << (total - 1 - q);
        }
        idx
    };

    let mut out = Operator::zeros(kd);
    for i in 0..kd {
        for j in 0..kd {
            let mut s = Complex64::new(0.0, 0.0);
            for t in 0..td {
                s += a.at(compose(i, t), compose(j, t));
            }
            out.set(i, j, s);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn tensor_identity_case() {
        let i2 = Operator::identity(2);
        let i4 = i2.tensor(&i2).unwrap();
        assert_eq!(i4, Operator::identity(4));
    }

    #[test]
    fn tensor_basis_projectors() {
        let p0 = Operator::from_diag_real(&[1.0, 0.0]);
        let p1 = Operator::from_diag_real(&[0.0, 1.0]);
        let t = p0.tensor(&p1).unwrap();
        assert_eq!(t, Operator::from_diag_real(&[0.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn tensor_respects_qubit_cap() {
        let big = Operator::identity(1 << 7);
        let err = big.tensor(&big).unwrap_err();
        assert!(matches!(err, Error::QubitCap { .. }));
    }

    #[test]
    fn controlled_structure() {
        let x = Operator::from_fn(2, |i, j| if i != j { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let cx = x.controlled();
        assert_eq!(cx.at(0, 0), c(1.0, 0.0));
        assert_eq!(cx.at(2, 3), c(1.0, 0.0));
        assert_eq!(cx.at(2, 2), c(0.0, 0.0));
        assert!(cx.is_unitary(1e-12));
    }

    #[test]
    fn partial_trace_rejects_bad_keep_set() {
        let a = Operator::identity(4);
        assert!(partial_trace(&a, &[0, 0]).is_err());
        assert!(partial_trace(&a, &[5]).is_err());
    }

    #[test]
    fn partial_trace_preserves_trace() {
        let a = Operator::from_fn(8, |i, j| c((i + j) as f64, (i as f64) - (j as f64)));
        let r = partial_trace(&a, &[1]).unwrap();
        let d = (a.trace() - r.trace()).norm();
        assert!(d < 1e-12);
    }

    #[test]
    fn embed_matches_tensor_for_leading_positions() {
        let x = Operator::from_fn(2, |i, j| if i != j { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let e = x.embed(&[0], 2).unwrap();
        let t = x.tensor(&Operator::identity(2)).unwrap();
        assert!(e.max_abs_diff(&t) < 1e-15);
        let e1 = x.embed(&[1], 2).unwrap();
        let t1 = Operator::identity(2).tensor(&x).unwrap();
        assert!(e1.max_abs_diff(&t1) < 1e-15);
    }

    #[test]
    fn swap_outer_registers_moves_contents() {
        // |a=1, c=0> -> |a=0, c=1> on a 2-qubit [A C] layout (b = 0).
        let s = Operator::swap_outer_registers(1, 0).unwrap();
        assert_eq!(s.at(0b01, 0b10), c(1.0, 0.0));
        assert_eq!(s.at(0b00, 0b00), c(1.0, 0.0));
        assert!(s.is_unitary(1e-12));
    }

    #[test]
    fn json_round_trip() {
        let a = Operator::from_fn(2, |i, j| c(i as f64, j as f64));
        let s = serde_json::to_string(&a).unwrap();
        let b: Operator = serde_json::from_str(&s).unwrap();
        assert_eq!(a, b);
        assert!(s.contains("\"dim\":2"));
    }
}
