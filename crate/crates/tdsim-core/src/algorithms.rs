//! Top-level trace-distance estimation: the purified-access pipeline, the
//! sample-access pipeline, threshold selection for exact and approximately
//! low-rank states, and the SWAP-test estimator for pure states.
//!
//! Both pipelines estimate the two trace terms of the sign-function route
//! separately: encode the halved difference `nu = (rho - sigma) / 2`,
//! transform its singular values by a sign-approximating polynomial, and
//! read the traces off Hadamard tests against each input state. The
//! purified path does this with exact unitaries and amplitude estimation;
//! the sample path replaces the encodings with calibrated noisy channels
//! and Bernoulli repetition.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::block_encoding::{
    density_to_block_encoding, lcu_difference, purify, PurifiedOracle,
};
use crate::channels::{
    hadamard_flag_prob_channel, lcu_difference_channels, qsvt_channel,
    sampling_to_block_encoding, SamplingMode,
};
use crate::config::{DEFAULT_MEDIAN_K, PREDICATE_TOL, QSVT_GAMMA, RANK_TOL, SIGN_POLY_ETA};
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_trace_term, flag_success_probability, median, qae_draw, qae_grid_for, shots_for,
    BackendMode,
    EstimationBackend, QueryLedger,
};
use crate::linalg::{
    hermitian_eigenvalues, hermitian_function, rank_delta, trace_distance_exact, w_small_eigen,
    DensityOperator, Operator,
};
use crate::poly_svt::{qsvt_block_encoding, sign_poly};
use crate::rng::RngStream;
use rand_distr::{Binomial, Distribution};

/// Prior knowledge about a state's spectrum: `r_bound(delta)` dominates the
/// number of eigenvalues above `delta`, `w_bound(delta)` dominates the mass
/// of eigenvalues at or below it.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "provenance", rename_all = "kebab-case")]
pub enum ApproxLowRankProfile {
    /// Exact rank-`r` state: `R = r`, `W = r delta`.
    #[serde(rename = "exact")]
    ExactLowRank { r: usize },
    /// Rank-`r` state through depolarizing noise of strength `lambda` on a
    /// `dim`-dimensional space.
    Depolarized { r: usize, lambda: f64, dim: usize },
    /// Thermal state of a Hamiltonian with gap `gap` above its `k` lowest
    /// levels.
    Gibbs { k: usize, gap: f64, dim: usize },
    /// Spectrum dominated by `c / i^2`.
    PowerLaw { c: f64, dim: usize },
    /// User-supplied step functions: rows of `(delta, r, w)` with `delta`
    /// ascending, `r` non-increasing, `w` non-decreasing.
    #[serde(rename = "user")]
    Tabulated { rows: Vec<(f64, f64, f64)> },
}

impl ApproxLowRankProfile {
    /// Upper bound on the number of eigenvalues exceeding `delta`.
    pub fn r_bound(&self, delta: f64) -> f64 {
        match self {
            Self::ExactLowRank { r } => *r as f64,
            Self::Depolarized { r, lambda, dim } => {
                if delta >= lambda / *dim as f64 {
                    *r as f64
                } else {
                    *dim as f64
                }
            }
            Self::Gibbs { k, gap, dim } => {
                if delta > 1.0 / (gap.exp() * *k as f64 + 1.0) {
                    *k as f64
                } else {
                    *dim as f64
                }
            }
            Self::PowerLaw { c, dim } => (c / delta).sqrt().min(*dim as f64),
            Self::Tabulated { rows } => rows
                .iter()
                .rev()
                .find(|(d, _, _)| *d <= delta)
                .or(rows.first())
                .map(|(_, r, _)| *r)
                .unwrap_or(f64::INFINITY),
        }
    }

    /// Upper bound on the mass of eigenvalues not greater than `delta`.
    pub fn w_bound(&self, delta: f64) -> f64 {
        match self {
            Self::ExactLowRank { r } => *r as f64 * delta,
            Self::Depolarized { r, lambda, dim } => {
                let n = *dim as f64;
                if delta >= lambda / n {
                    lambda * (n - *r as f64) / n + *r as f64 * delta
                } else {
                    n * delta
                }
            }
            Self::Gibbs { k, gap, dim } => {
                let n = *dim as f64;
                let kf = *k as f64;
                let floor = 1.0 / (gap.exp() * kf + 1.0);
                if delta > floor {
                    (n - kf) * floor + kf * delta
                } else {
                    n * delta
                }
            }
            Self::PowerLaw { c, dim } => {
                if delta >= *c {
                    return 1.0;
                }
                let s = (c / delta).sqrt();
                (c / (s - 1.0) - c / (*dim as f64 - 1.0)).clamp(0.0, 1.0)
            }
            Self::Tabulated { rows } => rows
                .iter()
                .find(|(d, _, _)| *d >= delta)
                .map(|(_, _, w)| *w)
                .unwrap_or(1.0),
        }
    }

    /// Largest threshold at which the mass bound stays below `target`;
    /// `None` when no threshold achieves it (the profile has a noise floor
    /// above the requested accuracy).
    pub fn largest_delta_with_w_leq(&self, target: f64) -> Option<f64> {
        if target <= 0.0 {
            return None;
        }
        let candidate = match self {
            Self::ExactLowRank { r } => target / *r as f64,
            Self::Depolarized { r, lambda, dim } => {
                let n = *dim as f64;
                let upper = (target - lambda * (n - *r as f64) / n) / *r as f64;
                if upper >= lambda / n {
                    upper
                } else {
                    (target / n).min(lambda / n)
                }
            }
            Self::Gibbs { k, gap, dim } => {
                let n = *dim as f64;
                let kf = *k as f64;
                let floor = 1.0 / (gap.exp() * kf + 1.0);
                let upper = (target - (n - kf) * floor) / kf;
                if upper > floor {
                    upper
                } else {
                    (target / n).min(floor)
                }
            }
            Self::PowerLaw { c, dim } => {
                let base = target + c / (*dim as f64 - 1.0);
                c * (base / (base + c)).powi(2)
            }
            Self::Tabulated { rows } => {
                return rows
                    .iter()
                    .rev()
                    .find(|(_, _, w)| *w <= target)
                    .map(|(d, _, _)| *d)
                    .filter(|d| *d > 0.0);
            }
        };
        (candidate > 0.0).then_some(candidate)
    }

    pub fn provenance(&self) -> &'static str {
        match self {
            Self::ExactLowRank { .. } => "exact",
            Self::Depolarized { .. } => "depolarized",
            Self::Gibbs { .. } => "gibbs",
            Self::PowerLaw { .. } => "power-law",
            Self::Tabulated { .. } => "user",
        }
    }
}

/// Threshold for exact rank-`r` pairs: `eps / 8r`, which guarantees the
/// small-eigenvalue mass of the halved difference stays below `eps / 4`.
pub fn choose_delta_p_rank(r: usize, eps: f64) -> Result<f64> {
    if r == 0 {
        return Err(Error::Argument("rank bound must be positive".into()));
    }
    if !(0.0..1.0).contains(&eps) || eps == 0.0 {
        return Err(Error::Argument("eps must lie in (0, 1)".into()));
    }
    Ok(eps / (8.0 * r as f64))
}

/// Threshold from approximate-low-rank profiles: find the largest
/// thresholds meeting mass `eps / 8` on each profile, then take
/// `2 min(delta_1, delta_2, eps / 8 r_1, eps / 8 r_2)`.
pub fn choose_delta_p_profile(
    p_rho: &ApproxLowRankProfile,
    p_sigma: &ApproxLowRankProfile,
    eps: f64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&eps) || eps == 0.0 {
        return Err(Error::Argument("eps must lie in (0, 1)".into()));
    }
    let target = eps / 8.0;
    let d1 = p_rho.largest_delta_with_w_leq(target).ok_or_else(|| {
        Error::Infeasible(format!(
            "profile ({}) cannot reach mass {target}; eps is below the noise floor",
            p_rho.provenance()
        ))
    })?;
    let d2 = p_sigma.largest_delta_with_w_leq(target).ok_or_else(|| {
        Error::Infeasible(format!(
            "profile ({}) cannot reach mass {target}; eps is below the noise floor",
            p_sigma.provenance()
        ))
    })?;
    let r1 = p_rho.r_bound(d1);
    let r2 = p_sigma.r_bound(d2);
    Ok(2.0 * [d1, d2, eps / (8.0 * r1), eps / (8.0 * r2)]
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}

/// Composed approximate-low-rank parameters of `(rho - sigma) / 2` when
/// both inputs are profiled at threshold `delta`: at most `r1 + r2`
/// eigenvalues exceed `delta / 2`, and the small-eigenvalue mass at
/// `delta / 2` is at most `((r1 + r2) delta + w1 + w2) / 2`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ComposedLowRank {
    pub rank_bound: usize,
    pub threshold: f64,
    pub mass_bound: f64,
}

pub fn approx_low_rank_difference(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    delta: f64,
) -> Result<ComposedLowRank> {
    let r1 = rank_delta(rho.op(), delta)?;
    let r2 = rank_delta(sigma.op(), delta)?;
    let w1 = w_small_eigen(rho.op(), delta)?;
    let w2 = w_small_eigen(sigma.op(), delta)?;
    Ok(ComposedLowRank {
        rank_bound: r1 + r2,
        threshold: delta / 2.0,
        mass_bound: ((r1 + r2) as f64 * delta + w1 + w2) / 2.0,
    })
}

/// Inputs controlling one estimation run.
#[derive(Clone, Debug)]
pub struct EstimationConfig {
    pub eps: f64,
    pub delta_p: Option<f64>,
    pub rank_bound: Option<usize>,
    pub profiles: Option<(ApproxLowRankProfile, ApproxLowRankProfile)>,
    pub seed: u64,
    /// `None` selects the algorithm default: amplitude estimation for the
    /// purified path, Bernoulli sampling for the sample path.
    pub backend: Option<BackendMode>,
    pub median_k: usize,
}

impl EstimationConfig {
    pub fn new(eps: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&eps) || eps == 0.0 {
            return Err(Error::Argument("eps must lie in (0, 1)".into()));
        }
        Ok(Self {
            eps,
            delta_p: None,
            rank_bound: None,
            profiles: None,
            seed,
            backend: None,
            median_k: DEFAULT_MEDIAN_K,
        })
    }

    pub fn with_rank_bound(mut self, r: usize) -> Self {
        self.rank_bound = Some(r);
        self
    }

    pub fn with_delta_p(mut self, delta_p: f64) -> Self {
        self.delta_p = Some(delta_p);
        self
    }

    pub fn with_profiles(
        mut self,
        p_rho: ApproxLowRankProfile,
        p_sigma: ApproxLowRankProfile,
    ) -> Self {
        self.profiles = Some((p_rho, p_sigma));
        self
    }

    pub fn with_backend(mut self, mode: BackendMode) -> Self {
        self.backend = Some(mode);
        self
    }

    pub fn with_median_k(mut self, k: usize) -> Self {
        self.median_k = k;
        self
    }
}

/// Everything a run reports: the estimate, the exact oracle value, the
/// parameters the algorithm pinned, and the ledger snapshot.
#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    pub mode: String,
    pub estimate: f64,
    pub exact: f64,
    pub abs_error: f64,
    pub eps: f64,
    pub eps_p: f64,
    pub eps_h: f64,
    pub delta_p: f64,
    pub delta_p_source: String,
    /// Channel budget per elementary use (sample path only).
    pub channel_delta: Option<f64>,
    pub degree: usize,
    pub m_grid: Option<usize>,
    pub shots: Option<u64>,
    pub median_k: usize,
    pub backend: String,
    pub seed: u64,
    pub gamma: u64,
    pub eta: f64,
    pub precondition_w: f64,
    pub precondition_ok: bool,
    pub budget_warning: bool,
    pub x_rho_runs: Vec<f64>,
    pub x_sigma_runs: Vec<f64>,
    pub ledger: BTreeMap<String, u64>,
    pub queries_total: u64,
    pub samples_total: u64,
}

impl EstimateReport {
    /// The stable CSV row: `seed, mode, eps, delta_p, estimate, exact,
    /// abs_error, queries_total, samples_total`.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.seed,
            self.mode,
            self.eps,
            self.delta_p,
            self.estimate,
            self.exact,
            self.abs_error,
            self.queries_total,
            self.samples_total
        )
    }

    pub fn csv_header() -> &'static str {
        "seed,mode,eps,delta_p,estimate,exact,abs_error,queries_total,samples_total"
    }
}

fn derive_delta_p(cfg: &EstimationConfig, nu: &Operator) -> Result<(f64, String)> {
    if let Some(dp) = cfg.delta_p {
        if dp <= 0.0 {
            return Err(Error::Argument("delta_p must be positive".into()));
        }
        return Ok((dp, "config".into()));
    }
    if let Some(r) = cfg.rank_bound {
        return Ok((choose_delta_p_rank(r, cfg.eps)?, "rank-bound".into()));
    }
    if let Some((p_rho, p_sigma)) = &cfg.profiles {
        return Ok((
            choose_delta_p_profile(p_rho, p_sigma, cfg.eps)?,
            "profile".into(),
        ));
    }
    // Oracle-assisted fallback (test mode): the largest eigenvalue
    // magnitude of nu whose small-eigenvalue mass stays within eps / 4.
    let eigs = hermitian_eigenvalues(nu)?;
    let mut mags: Vec<f64> = eigs.iter().map(|l| l.abs()).filter(|&m| m > RANK_TOL).collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if mags.is_empty() {
        return Ok((cfg.eps / 8.0, "oracle-spectrum".into()));
    }
    let mut best = mags[0] / 2.0;
    let mut cum = 0.0;
    for (i, &m) in mags.iter().enumerate() {
        cum += m;
        // extend through ties before judging the prefix
        if i + 1 < mags.len() && (mags[i + 1] - m).abs() < 1e-15 {
            continue;
        }
        if cum <= cfg.eps / 4.0 {
            best = m;
        } else {
            break;
        }
    }
    Ok((best, "oracle-spectrum".into()))
}

/// Matrix-level sign-route value `(tr(rho S) - tr(sigma S)) / 2` with
/// `S = sgn(nu)` computed in the eigenbasis; an exact cross-check oracle
/// for the estimators.
pub fn sign_route_trace_distance(
    rho: &DensityOperator,
    sigma: &DensityOperator,
) -> Result<f64> {
    let nu = rho.op().sub(sigma.op())?.scale_re(0.5);
    let s = hermitian_function(&nu, |x| {
        if x.abs() <= RANK_TOL {
            0.0
        } else {
            x.signum()
        }
    })?;
    let tr_rho = s.mul(rho.op())?.trace().re;
    let tr_sigma = s.mul(sigma.op())?.trace().re;
    Ok((tr_rho - tr_sigma) / 2.0)
}

/// Trace-distance estimation from purified access: encode both states,
/// combine to `nu`, transform by the sign polynomial at
/// `(delta_p, eps / 8)`, and estimate both trace terms to `eps / 4` by
/// Hadamard tests with amplitude estimation.
pub fn estimate_purified(
    o_rho: &PurifiedOracle,
    o_sigma: &PurifiedOracle,
    cfg: &EstimationConfig,
) -> Result<EstimateReport> {
    let rho = o_rho.reduced_state()?;
    let sigma = o_sigma.reduced_state()?;
    if rho.dim() != sigma.dim() {
        return Err(Error::Dimension("states live on different registers".into()));
    }
    let eps = cfg.eps;
    let nu = rho.op().sub(sigma.op())?.scale_re(0.5);
    let (delta_p, delta_p_source) = derive_delta_p(cfg, &nu)?;
    let precondition_w = w_small_eigen(&nu, delta_p)?;
    let precondition_ok = precondition_w <= eps / 4.0 + PREDICATE_TOL;

    let eps_p = eps / 8.0;
    let eps_h = eps / 4.0;
    let poly = sign_poly(delta_p, eps_p)?;

    let u_rho = density_to_block_encoding(o_rho)?;
    let u_sigma = density_to_block_encoding(o_sigma)?;
    let u_nu = lcu_difference(&u_rho, &u_sigma)?.with_self_counter("U_nu");
    let u_psv = qsvt_block_encoding(&poly, &u_nu)?.with_self_counter("U_psv");

    let mode = cfg.backend.unwrap_or(BackendMode::Qae);
    let base = RngStream::root(cfg.seed).child("purified");
    let mut ledger = QueryLedger::new();
    let backend_rho = EstimationBackend::new(mode, base.child("x_rho"), cfg.median_k)?;
    let backend_sigma = EstimationBackend::new(mode, base.child("x_sigma"), cfg.median_k)?;
    let x_rho = estimate_trace_term(&u_psv, o_rho, eps_h, &backend_rho, &mut ledger)?;
    let x_sigma = estimate_trace_term(&u_psv, o_sigma, eps_h, &backend_sigma, &mut ledger)?;

    let estimate = (x_rho.value - x_sigma.value) / 2.0;
    let exact = trace_distance_exact(&rho, &sigma)?;
    let queries_total = ledger.get(o_rho.label()) + ledger.get(o_sigma.label());
    let samples_total = ledger.total_with_prefix("samples_");
    Ok(EstimateReport {
        mode: "purified".into(),
        estimate,
        exact,
        abs_error: (estimate - exact).abs(),
        eps,
        eps_p,
        eps_h,
        delta_p,
        delta_p_source,
        channel_delta: None,
        degree: poly.degree(),
        m_grid: x_rho.m_grid,
        shots: x_rho.shots,
        median_k: cfg.median_k,
        backend: mode.to_string(),
        seed: cfg.seed,
        gamma: QSVT_GAMMA,
        eta: SIGN_POLY_ETA,
        precondition_w,
        precondition_ok,
        budget_warning: false,
        x_rho_runs: x_rho.per_run,
        x_sigma_runs: x_sigma.per_run,
        ledger: ledger.counts().clone(),
        queries_total,
        samples_total,
    })
}

/// Channel budget for the sample path:
/// `pi eps delta_p / (48 gamma eta ln(1 / eps_p))`.
pub fn sample_channel_delta(eps: f64, delta_p: f64, eps_p: f64) -> f64 {
    std::f64::consts::PI * eps * delta_p
        / (48.0 * QSVT_GAMMA as f64 * SIGN_POLY_ETA * (1.0 / eps_p).ln())
}

/// Trace-distance estimation from identical copies: convert samples to
/// noisy block-encoding channels at the computed budget, combine and
/// transform them as if they were unitaries, and read the two trace terms
/// off Bernoulli-sampled Hadamard tests on fresh copies. Returns
/// `2 (x_rho - x_sigma) / pi`.
pub fn estimate_samples(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    cfg: &EstimationConfig,
) -> Result<EstimateReport> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Dimension("states live on different registers".into()));
    }
    let eps = cfg.eps;
    let nu = rho.op().sub(sigma.op())?.scale_re(0.5);
    let (delta_p, delta_p_source) = derive_delta_p(cfg, &nu)?;
    let precondition_w = w_small_eigen(&nu, delta_p)?;
    let precondition_ok = precondition_w <= eps / 4.0 + PREDICATE_TOL;

    let eps_p = eps / 12.0;
    let eps_h = std::f64::consts::PI * eps / 24.0;
    let poly = sign_poly(delta_p, eps_p)?;
    let delta = sample_channel_delta(eps, delta_p, eps_p);

    let e_rho = sampling_to_block_encoding(rho, delta, SamplingMode::NoisyOracle, "rho")?;
    let e_sigma = sampling_to_block_encoding(sigma, delta, SamplingMode::NoisyOracle, "sigma")?;
    let e_nu = lcu_difference_channels(&e_rho, &e_sigma)?;
    let e_psv = qsvt_channel(&poly, &e_nu)?;
    let budget_warning = e_psv.budget_warning();

    let mode = cfg.backend.unwrap_or(BackendMode::Sampling);
    if mode == BackendMode::Qae {
        return Err(Error::Argument(
            "the sample path estimates by repetition; amplitude estimation needs purified access"
                .into(),
        ));
    }
    let shots = shots_for(eps_h);
    let base = RngStream::root(cfg.seed).child("samples");
    let mut ledger = QueryLedger::new();

    let run_term = |state: &DensityOperator,
                        label: &str,
                        ledger: &mut QueryLedger|
     -> Result<Vec<f64>> {
        let p0 = hadamard_flag_prob_channel(&e_psv, state)?;
        let reps = if mode == BackendMode::Ideal { 1 } else { cfg.median_k };
        let mut runs = Vec::with_capacity(reps);
        for rep in 0..reps {
            let x = match mode {
                BackendMode::Ideal => {
                    ledger.charge(e_psv.per_use(), 1);
                    ledger.inc(&format!("samples_{label}"), 1);
                    2.0 * p0 - 1.0
                }
                _ => {
                    ledger.charge(e_psv.per_use(), shots);
                    ledger.inc(&format!("samples_{label}"), shots);
                    let stream = base.child(label).child_indexed("rep", rep);
                    let hits = Binomial::new(shots, p0)
                        .map_err(|e| Error::Argument(format!("binomial: {e}")))?
                        .sample(&mut stream.rng());
                    2.0 * (hits as f64 / shots as f64) - 1.0
                }
            };
            runs.push(x);
        }
        Ok(runs)
    };
    let x_rho_runs = run_term(rho, "rho", &mut ledger)?;
    let x_sigma_runs = run_term(sigma, "sigma", &mut ledger)?;
    let x_rho = median(&x_rho_runs);
    let x_sigma = median(&x_sigma_runs);

    let estimate = 2.0 * (x_rho - x_sigma) / std::f64::consts::PI;
    let exact = trace_distance_exact(rho, sigma)?;
    let queries_total = ledger.total_with_prefix("E_");
    let samples_total = ledger.total_with_prefix("samples_");
    Ok(EstimateReport {
        mode: "samples".into(),
        estimate,
        exact,
        abs_error: (estimate - exact).abs(),
        eps,
        eps_p,
        eps_h,
        delta_p,
        delta_p_source,
        channel_delta: Some(delta),
        degree: poly.degree(),
        m_grid: None,
        shots: Some(shots),
        median_k: cfg.median_k,
        backend: mode.to_string(),
        seed: cfg.seed,
        gamma: QSVT_GAMMA,
        eta: SIGN_POLY_ETA,
        precondition_w,
        precondition_ok,
        budget_warning,
        x_rho_runs,
        x_sigma_runs,
        ledger: ledger.counts().clone(),
        queries_total,
        samples_total,
    })
}

/// Controlled-SWAP test circuit on two prepared registers: the flag qubit
/// reads 0 with probability `(1 + |<psi|phi>|^2) / 2`.
pub fn swap_test_circuit(o_psi: &PurifiedOracle, o_phi: &PurifiedOracle) -> Result<Operator> {
    let n = o_psi.n();
    if o_phi.n() != n {
        return Err(Error::Dimension("states live on different registers".into()));
    }
    let (a_psi, a_phi) = (o_psi.n_anc(), o_phi.n_anc());
    let rest = 2 * n + a_psi + a_phi;
    let prep = o_psi.operator().tensor(o_phi.operator())?;
    let swap = Operator::swap_outer_registers(n, 0)?;
    let targets: Vec<usize> = (0..n).chain(n + a_psi..n + a_psi + n).collect();
    let cswap = swap.embed(&targets, rest)?.controlled();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let h = Operator::from_fn(2, |i, j| {
        let v = if i == 1 && j == 1 { -s } else { s };
        num_complex::Complex64::new(v, 0.0)
    });
    let h_full = h.tensor(&Operator::identity(1 << rest))?;
    h_full
        .mul(&cswap)?
        .mul(&h_full)?
        .mul(&Operator::identity(2).tensor(&prep)?)
}

/// SWAP-test trace-distance estimator for pure states: estimate the squared
/// overlap to additive error `eps^2 / 4` by amplitude estimation and return
/// `sqrt(1 - x)`; the propagated error is at most `eps`.
pub fn swap_test_pure(
    o_psi: &PurifiedOracle,
    o_phi: &PurifiedOracle,
    eps: f64,
    cfg: &EstimationConfig,
) -> Result<EstimateReport> {
    if !(0.0..1.0).contains(&eps) || eps == 0.0 {
        return Err(Error::Argument("eps must lie in (0, 1)".into()));
    }
    let psi = o_psi.reduced_state()?;
    let phi = o_phi.reduced_state()?;
    if psi.dim() != phi.dim() {
        return Err(Error::Dimension("states live on different registers".into()));
    }
    for (name, s) in [("first", &psi), ("second", &phi)] {
        if (s.purity() - 1.0).abs() > 1e-9 {
            return Err(Error::Argument(format!(
                "{name} input is mixed (purity {:.6}); the SWAP test needs pure states",
                s.purity()
            )));
        }
    }
    let delta = eps * eps / 4.0;
    let p0 = flag_success_probability(&swap_test_circuit(o_psi, o_phi)?)?;

    let mode = cfg.backend.unwrap_or(BackendMode::Qae);
    let base = RngStream::root(cfg.seed).child("swap-pure");
    let mut ledger = QueryLedger::new();
    let mut per_cost = o_psi.per_use().clone();
    per_cost.add(o_phi.per_use());

    let reps = if mode == BackendMode::Ideal { 1 } else { cfg.median_k };
    let mut m_grid = None;
    let mut shots_used = None;
    let mut runs = Vec::with_capacity(reps);
    for rep in 0..reps {
        let stream = base.child_indexed("rep", rep);
        let p_hat = match mode {
            BackendMode::Ideal => {
                ledger.charge(&per_cost, 1);
                p0
            }
            BackendMode::Qae => {
                let m = qae_grid_for(delta);
                m_grid = Some(m);
                ledger.charge(&per_cost, m as u64);
                qae_draw(p0, m, &stream)
            }
            BackendMode::Sampling => {
                let shots = shots_for(delta);
                shots_used = Some(shots);
                ledger.charge(&per_cost, shots);
                let hits = Binomial::new(shots, p0)
                    .map_err(|e| Error::Argument(format!("binomial: {e}")))?
                    .sample(&mut stream.rng());
                hits as f64 / shots as f64
            }
        };
        runs.push(2.0 * p_hat - 1.0);
    }
    let x = median(&runs);
    let estimate = (1.0 - x).max(0.0).sqrt();
    let exact = trace_distance_exact(&psi, &phi)?;
    let queries_total = ledger.get(o_psi.label()) + ledger.get(o_phi.label());
    Ok(EstimateReport {
        mode: "swap-pure".into(),
        estimate,
        exact,
        abs_error: (estimate - exact).abs(),
        eps,
        eps_p: 0.0,
        eps_h: delta,
        delta_p: 0.0,
        delta_p_source: "n/a".into(),
        channel_delta: None,
        degree: 0,
        m_grid,
        shots: shots_used,
        median_k: cfg.median_k,
        backend: mode.to_string(),
        seed: cfg.seed,
        gamma: QSVT_GAMMA,
        eta: SIGN_POLY_ETA,
        precondition_w: 0.0,
        precondition_ok: true,
        budget_warning: false,
        x_rho_runs: runs,
        x_sigma_runs: Vec::new(),
        ledger: ledger.counts().clone(),
        queries_total,
        samples_total: 0,
    })
}

/// Purify both states and run the purified-access pipeline; convenience
/// entry point for density-operator inputs.
pub fn estimate_purified_states(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    cfg: &EstimationConfig,
) -> Result<EstimateReport> {
    let o_rho = purify(rho, "O_rho")?;
    let o_sigma = purify(sigma, "O_sigma")?;
    estimate_purified(&o_rho, &o_sigma, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::gen_low_rank;

    #[test]
    fn rank_threshold_formula() {
        assert!((choose_delta_p_rank(4, 0.1).unwrap() - 0.003125).abs() < 1e-15);
        assert!((choose_delta_p_rank(1, 0.8).unwrap() - 0.1).abs() < 1e-15);
        assert!(choose_delta_p_rank(0, 0.1).is_err());
        assert!(choose_delta_p_rank(2, 1.0).is_err());
    }

    #[test]
    fn profile_selector_exact_low_rank() {
        // delta_1 = delta_2 = eps/8r, both rank terms equal -> 2 * eps/8r
        let p = ApproxLowRankProfile::ExactLowRank { r: 3 };
        let eps = 0.2;
        let dp = choose_delta_p_profile(&p, &p, eps).unwrap();
        assert!((dp - eps / (4.0 * 3.0)).abs() < 1e-15);
    }

    #[test]
    fn profile_selector_infeasible_floor() {
        let p = ApproxLowRankProfile::Tabulated {
            rows: vec![(0.001, 4.0, 0.3), (0.01, 4.0, 0.4)],
        };
        let q = p.clone();
        assert!(matches!(
            choose_delta_p_profile(&p, &q, 0.1),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn composed_difference_of_identical_states_is_trivial() {
        let g = gen_low_rank(2, 2, &RngStream::root(5).child("t")).unwrap();
        let c = approx_low_rank_difference(&g.state, &g.state, 0.05).unwrap();
        // the difference is zero: measured rank and mass vanish
        let nu = Operator::zeros(4);
        assert_eq!(rank_delta(&nu, c.threshold).unwrap(), 0);
        assert!(c.rank_bound >= 1); // composed bound counts both inputs
    }

    #[test]
    fn sign_route_matches_exact_distance() {
        let a = gen_low_rank(2, 2, &RngStream::root(8).child("a")).unwrap().state;
        let b = gen_low_rank(2, 3, &RngStream::root(8).child("b")).unwrap().state;
        let via_sign = sign_route_trace_distance(&a, &b).unwrap();
        let exact = trace_distance_exact(&a, &b).unwrap();
        assert!((via_sign - exact).abs() < 1e-10);
    }

    #[test]
    fn purified_orthogonal_pure_states() {
        let r0 = DensityOperator::basis_state(1, 0).unwrap();
        let r1 = DensityOperator::basis_state(1, 1).unwrap();
        let cfg = EstimationConfig::new(0.1, 7).unwrap().with_rank_bound(1);
        let rep = estimate_purified_states(&r0, &r1, &cfg).unwrap();
        assert!((rep.exact - 1.0).abs() < 1e-12);
        assert!(
            rep.abs_error <= 0.1,
            "estimate {} missed exact {}",
            rep.estimate,
            rep.exact
        );
        assert!(rep.precondition_ok);
    }

    #[test]
    fn purified_identical_states_stay_within_eps() {
        let g = gen_low_rank(2, 2, &RngStream::root(3).child("s")).unwrap();
        let cfg = EstimationConfig::new(0.1, 11).unwrap().with_rank_bound(2);
        let rep = estimate_purified_states(&g.state, &g.state, &cfg).unwrap();
        assert_eq!(rep.exact, 0.0);
        assert!(rep.estimate.abs() <= 0.1, "estimate {}", rep.estimate);
    }

    #[test]
    fn purified_ideal_backend_is_deterministic_and_tight() {
        let a = gen_low_rank(2, 2, &RngStream::root(21).child("a")).unwrap().state;
        let b = gen_low_rank(2, 2, &RngStream::root(21).child("b")).unwrap().state;
        let cfg = EstimationConfig::new(0.1, 1)
            .unwrap()
            .with_rank_bound(2)
            .with_backend(BackendMode::Ideal);
        let r1 = estimate_purified_states(&a, &b, &cfg).unwrap();
        let r2 = estimate_purified_states(&a, &b, &cfg).unwrap();
        assert_eq!(r1.estimate, r2.estimate);
        // ideal backend: only polynomial error remains, <= 2 eps_p + w-term
        assert!(r1.abs_error <= 2.0 * r1.eps_p + r1.precondition_w + 1e-9);
    }

    #[test]
    fn samples_orthogonal_pure_states() {
        let r0 = DensityOperator::basis_state(1, 0).unwrap();
        let r1 = DensityOperator::basis_state(1, 1).unwrap();
        let cfg = EstimationConfig::new(0.2, 5).unwrap().with_rank_bound(1);
        let rep = estimate_samples(&r0, &r1, &cfg).unwrap();
        assert!(
            rep.abs_error <= 0.2,
            "estimate {} exact {}",
            rep.estimate,
            rep.exact
        );
        assert!(!rep.budget_warning);
    }

    #[test]
    fn samples_rejects_qae_backend() {
        let r0 = DensityOperator::basis_state(1, 0).unwrap();
        let cfg = EstimationConfig::new(0.2, 5)
            .unwrap()
            .with_rank_bound(1)
            .with_backend(BackendMode::Qae);
        assert!(estimate_samples(&r0, &r0, &cfg).is_err());
    }

    #[test]
    fn swap_test_identical_and_orthogonal() {
        let psi = gen_low_rank(1, 1, &RngStream::root(2).child("p")).unwrap().state;
        let o_psi = purify(&psi, "O_psi").unwrap();
        let cfg = EstimationConfig::new(0.2, 3).unwrap();
        let same = swap_test_pure(&o_psi, &o_psi, 0.2, &cfg).unwrap();
        assert!(same.estimate <= 0.2);

        let r0 = purify(&DensityOperator::basis_state(1, 0).unwrap(), "O_psi").unwrap();
        let r1 = purify(&DensityOperator::basis_state(1, 1).unwrap(), "O_phi").unwrap();
        let orth = swap_test_pure(&r0, &r1, 0.2, &cfg).unwrap();
        assert!((orth.estimate - 1.0).abs() <= 0.2);
    }

    #[test]
    fn swap_test_rejects_mixed_input() {
        let mixed = DensityOperator::maximally_mixed(1);
        let o = purify(&mixed, "O_psi").unwrap();
        let cfg = EstimationConfig::new(0.2, 3).unwrap();
        assert!(swap_test_pure(&o, &o, 0.2, &cfg).is_err());
    }
}
