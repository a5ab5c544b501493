//! Hadamard tests, canonical amplitude estimation, and query/sample
//! accounting.
//!
//! Every composite object (block-encoding, channel, test circuit) carries a
//! [`CostMap`] describing what one use charges to each named oracle; a run
//! accumulates those into a [`QueryLedger`]. Ledger keys used by the
//! algorithms: `O_rho` / `O_sigma` (purified-oracle queries), `U_nu` /
//! `U_psv` (composite-encoding uses), `E_rho` / `E_sigma` / `E_nu` /
//! `E_psv` (channel uses), and `samples_rho` / `samples_sigma` (copies
//! consumed).

use rand::Rng;
use serde::{Deserialize, Serialize};
use rand_distr::{Binomial, Distribution};
use std::collections::BTreeMap;

use crate::block_encoding::{BlockEncoding, PurifiedOracle};
use crate::config::{self, PREDICATE_TOL};
use crate::error::{Error, Result};
use crate::linalg::{DensityOperator, Operator};
use crate::rng::RngStream;

/// Per-use cost of a composite object, keyed by oracle name.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CostMap(BTreeMap<String, u64>);

impl CostMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(label: &str, count: u64) -> Self {
        let mut m = Self::new();
        m.inc(label, count);
        m
    }

    pub fn inc(&mut self, label: &str, count: u64) {
        *self.0.entry(label.to_string()).or_insert(0) += count;
    }

    pub fn add(&mut self, other: &Self) {
        for (k, v) in &other.0 {
            *self.0.entry(k.clone()).or_insert(0) += v;
        }
    }

    pub fn scaled(&self, times: u64) -> Self {
        Self(self.0.iter().map(|(k, v)| (k.clone(), v * times)).collect())
    }

    pub fn get(&self, label: &str) -> u64 {
        self.0.get(label).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.0.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

/// Monotone counters keyed by oracle name; additive across subroutines.
#[derive(Clone, Debug, Default)]
pub struct QueryLedger {
    counts: BTreeMap<String, u64>,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&mut self, cost: &CostMap, times: u64) {
        for (k, v) in cost.iter() {
            *self.counts.entry(k.to_string()).or_insert(0) += v * times;
        }
    }

    pub fn inc(&mut self, label: &str, count: u64) {
        *self.counts.entry(label.to_string()).or_insert(0) += count;
    }

    pub fn get(&self, label: &str) -> u64 {
        self.counts.get(label).copied().unwrap_or(0)
    }

    pub fn merge(&mut self, other: &Self) {
        for (k, v) in &other.counts {
            *self.counts.entry(k.clone()).or_insert(0) += v;
        }
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    /// Sum of all counters whose name starts with the prefix.
    pub fn total_with_prefix(&self, prefix: &str) -> u64 {
        self.counts
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(_, v)| v)
            .sum()
    }

    /// CSV rows `run_id, oracle, count`.
    pub fn csv_rows(&self, run_id: &str) -> Vec<(String, String, u64)> {
        self.counts
            .iter()
            .map(|(k, &v)| (run_id.to_string(), k.clone(), v))
            .collect()
    }
}

/// Which quadrature of the trace the Hadamard test reads out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TracePart {
    Real,
    Imag,
}

/// How expectation values are estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendMode {
    /// Exact probabilities; deterministic unit-test mode.
    Ideal,
    /// Bernoulli sampling at `O(1/eps^2)` shots.
    Sampling,
    /// Canonical phase-estimation distribution at `O(1/eps)` queries.
    Qae,
}

impl std::str::FromStr for BackendMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(Self::Ideal),
            "sampling" => Ok(Self::Sampling),
            "qae" => Ok(Self::Qae),
            other => Err(Error::Argument(format!("unknown backend '{other}'"))),
        }
    }
}

impl std::fmt::Display for BackendMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Ideal => write!(f, "ideal"),
            Self::Sampling => write!(f, "sampling"),
            Self::Qae => write!(f, "qae"),
        }
    }
}

/// Backend mode plus its RNG stream and median-amplification policy.
#[derive(Clone, Debug)]
pub struct EstimationBackend {
    pub mode: BackendMode,
    pub stream: RngStream,
    pub median_k: usize,
}

impl EstimationBackend {
    pub fn new(mode: BackendMode, stream: RngStream, median_k: usize) -> Result<Self> {
        if median_k == 0 || median_k % 2 == 0 {
            return Err(Error::Argument("median K must be odd and positive".into()));
        }
        Ok(Self {
            mode,
            stream,
            median_k,
        })
    }

    /// Repetition count: ideal mode needs a single run.
    pub fn reps(&self) -> usize {
        match self.mode {
            BackendMode::Ideal => 1,
            _ => self.median_k,
        }
    }
}

/// Median of a non-empty sample.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

/// Exact outcome-0 probability of the Hadamard test on a block-encoded
/// operator and a state: `(1 + Re tr(A rho)) / 2` (or the imaginary-part
/// variant), clamped to `[0, 1]`. Returns the probability and the clamp
/// magnitude; charges one query to the encoding.
pub fn hadamard_test_prob_raw(
    be: &BlockEncoding,
    rho: &DensityOperator,
    part: TracePart,
    ledger: &mut QueryLedger,
) -> Result<(f64, f64)> {
    if rho.dim() != be.system_dim() {
        return Err(Error::Dimension(format!(
            "state dimension {} does not match encoded system {}",
            rho.dim(),
            be.system_dim()
        )));
    }
    let tr = be.raw_block().mul(rho.op())?.trace();
    let val = match part {
        TracePart::Real => tr.re,
        TracePart::Imag => tr.im,
    };
    let p = (1.0 + val) / 2.0;
    let clamped = p.clamp(0.0, 1.0);
    ledger.charge(be.per_use(), 1);
    Ok((clamped, (p - clamped).abs()))
}

/// Clamped Hadamard-test probability; see [`hadamard_test_prob_raw`].
pub fn hadamard_test_prob(
    be: &BlockEncoding,
    rho: &DensityOperator,
    part: TracePart,
    ledger: &mut QueryLedger,
) -> Result<f64> {
    Ok(hadamard_test_prob_raw(be, rho, part, ledger)?.0)
}

/// Empirical mean of `shots` Bernoulli draws of the Hadamard test. Charges
/// `shots` queries to the encoding and `shots` entries on the given sample
/// counter.
pub fn hadamard_test_sample(
    be: &BlockEncoding,
    rho: &DensityOperator,
    part: TracePart,
    shots: u64,
    sample_label: &str,
    stream: &RngStream,
    ledger: &mut QueryLedger,
) -> Result<f64> {
    if shots == 0 {
        return Err(Error::Argument("shots must be positive".into()));
    }
    let mut probe = QueryLedger::new();
    let (p, _) = hadamard_test_prob_raw(be, rho, part, &mut probe)?;
    ledger.charge(be.per_use(), shots);
    ledger.inc(sample_label, shots);
    let hits = Binomial::new(shots, p)
        .map_err(|e| Error::Argument(format!("binomial: {e}")))?
        .sample(&mut stream.rng());
    Ok(hits as f64 / shots as f64)
}

/// Success probability marked by the flag qubit (the most significant one,
/// outcome 0) of `circuit |0...0>`.
pub fn flag_success_probability(circuit: &Operator) -> Result<f64> {
    if !circuit.is_unitary(PREDICATE_TOL) {
        return Err(Error::Argument("estimation circuit must be unitary".into()));
    }
    let d = circuit.dim();
    if d < 2 {
        return Err(Error::Dimension("circuit needs a flag qubit".into()));
    }
    let p: f64 = (0..d / 2).map(|i| circuit.at(i, 0).norm_sqr()).sum();
    Ok(p.clamp(0.0, 1.0))
}

/// Outcome distribution of canonical `M`-point phase estimation on the
/// Grover iterate of a circuit with success probability `p`: squared
/// Dirichlet-kernel weights around the two conjugate phases.
pub fn qae_distribution(p: f64, m: usize) -> Vec<f64> {
    let theta = (p.clamp(0.0, 1.0)).sqrt().asin() / std::f64::consts::PI; // in turns
    let kernel = |x: f64| -> f64 {
        let xr = x - x.round();
        if xr.abs() < 1e-15 {
            return 1.0;
        }
        let num = (std::f64::consts::PI * m as f64 * xr).sin();
        let den = (m as f64) * (std::f64::consts::PI * xr).sin();
        (num / den).powi(2)
    };
    let mut dist: Vec<f64> = (0..m)
        .map(|y| {
            let x = y as f64 / m as f64;
            0.5 * (kernel(x - theta) + kernel(x + theta))
        })
        .collect();
    let total: f64 = dist.iter().sum();
    debug_assert!((total - 1.0).abs() < 1e-9, "QAE weights sum to {total}");
    for w in dist.iter_mut() {
        *w /= total;
    }
    dist
}

/// One draw of canonical amplitude estimation at grid size `M` (rounded up
/// to a power of two): sample an outcome `y` from the phase-estimation
/// distribution and report `sin^2(pi y / M)` with `y` canonicalized to the
/// lower half of the grid. Charges are the caller's responsibility
/// (one query per grid point, `M` in total).
pub fn amplitude_estimate(
    circuit: &Operator,
    m: usize,
    stream: &RngStream,
) -> Result<f64> {
    if m < 2 {
        return Err(Error::Argument("grid size M must be at least 2".into()));
    }
    let p = flag_success_probability(circuit)?;
    Ok(qae_draw(p, m, stream))
}

/// Amplitude-estimation draw from a known success probability.
pub fn qae_draw(p: f64, m: usize, stream: &RngStream) -> f64 {
    let m = m.next_power_of_two();
    let dist = qae_distribution(p, m);
    let mut rng = stream.rng();
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut y = m - 1;
    for (i, w) in dist.iter().enumerate() {
        acc += w;
        if u <= acc {
            y = i;
            break;
        }
    }
    let y_canon = y.min(m - y);
    let s = (std::f64::consts::PI * y_canon as f64 / m as f64).sin();
    s * s
}

/// Theorem-style amplitude-estimation error bound at grid size `M`.
pub fn qae_error_bound(p: f64, m: usize) -> f64 {
    let mf = m as f64;
    2.0 * std::f64::consts::PI * (p * (1.0 - p)).sqrt() / mf
        + std::f64::consts::PI.powi(2) / (mf * mf)
}

/// Grid size for a target additive error in the `2p - 1` trace scale.
pub fn qae_grid_for(eps_h: f64) -> usize {
    ((config::QAE_GRID_C / eps_h).ceil() as usize)
        .max(2)
        .next_power_of_two()
}

/// Shot count for a target additive error in the trace scale.
pub fn shots_for(eps_h: f64) -> u64 {
    (config::SHOTS_C / (eps_h * eps_h)).ceil() as u64
}

/// Composite Hadamard-test circuit estimating `tr(A rho)` for a
/// block-encoded `A` and a purification oracle for `rho`: registers are
/// `[flag | encoding ancillas | system | purification ancillas]`, the
/// oracle prepares the state, and the flag marks the Hadamard outcome.
pub fn hadamard_test_circuit(
    be: &BlockEncoding,
    oracle: &PurifiedOracle,
) -> Result<Operator> {
    if oracle.n() != be.system_qubits() {
        return Err(Error::Dimension(
            "oracle system size does not match the encoding".into(),
        ));
    }
    let pur_anc = oracle.n_anc();
    let h = {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Operator::from_fn(2, |i, j| {
            let v = if i == 1 && j == 1 { -s } else { s };
            num_complex::Complex64::new(v, 0.0)
        })
    };
    let rest_dim = 1usize << (be.ancillas() + be.system_qubits() + pur_anc);
    let h_full = h.tensor(&Operator::identity(rest_dim))?;
    let ctrl_u = be
        .unitary()
        .controlled()
        .tensor(&Operator::identity(1 << pur_anc))?;
    let prep = Operator::identity(1 << (1 + be.ancillas())).tensor(oracle.operator())?;
    h_full.mul(&ctrl_u)?.mul(&h_full)?.mul(&prep)
}

/// Result of one trace-term estimation: the median value and the per-run
/// outcomes behind it.
#[derive(Clone, Debug, Serialize)]
pub struct TraceTermEstimate {
    pub value: f64,
    pub per_run: Vec<f64>,
    pub m_grid: Option<usize>,
    pub shots: Option<u64>,
}

/// Estimate `tr(A rho)` for the block-encoded `A` within `eps_h`, with the
/// backend's estimator and median amplification. In `qae` mode the phase
/// grid has `M = next_pow2(ceil(8 / eps_h))` points and each run charges
/// `M` queries to the composite circuit (one per Grover power on the grid);
/// in `sampling` mode each run charges `ceil(4 / eps_h^2)` shots.
pub fn estimate_trace_term(
    be: &BlockEncoding,
    oracle: &PurifiedOracle,
    eps_h: f64,
    backend: &EstimationBackend,
    ledger: &mut QueryLedger,
) -> Result<TraceTermEstimate> {
    if eps_h <= 0.0 {
        return Err(Error::Argument("eps_h must be positive".into()));
    }
    let circuit = hadamard_test_circuit(be, oracle)?;
    let mut circuit_cost = be.per_use().clone();
    circuit_cost.add(oracle.per_use());

    let p_exact = flag_success_probability(&circuit)?;
    let mut per_run = Vec::with_capacity(backend.reps());
    let mut m_grid = None;
    let mut shots_used = None;
    for rep in 0..backend.reps() {
        let rep_stream = backend.stream.child_indexed("rep", rep);
        let p_hat = match backend.mode {
            BackendMode::Ideal => {
                ledger.charge(&circuit_cost, 1);
                p_exact
            }
            BackendMode::Qae => {
                let m = qae_grid_for(eps_h);
                m_grid = Some(m);
                ledger.charge(&circuit_cost, m as u64);
                qae_draw(p_exact, m, &rep_stream)
            }
            BackendMode::Sampling => {
                let shots = shots_for(eps_h);
                shots_used = Some(shots);
                ledger.charge(&circuit_cost, shots);
                let hits = Binomial::new(shots, p_exact)
                    .map_err(|e| Error::Argument(format!("binomial: {e}")))?
                    .sample(&mut rep_stream.rng());
                hits as f64 / shots as f64
            }
        };
        per_run.push(2.0 * p_hat - 1.0);
    }
    Ok(TraceTermEstimate {
        value: median(&per_run),
        per_run,
        m_grid,
        shots: shots_used,
    })
}
