//! The acceptance suite: ten criteria with pinned seeds and tolerances,
//! runnable via `tdsim accept` or the `acceptance` integration test.
//! Each criterion prints one pass/fail line; failures are reported, not
//! thrown.

use tdsim_core::algorithms::{
    approx_low_rank_difference, choose_delta_p_profile, estimate_purified_states,
    estimate_samples, sign_route_trace_distance, swap_test_pure, ApproxLowRankProfile,
    EstimationConfig,
};
use tdsim_core::block_encoding::purify;
use tdsim_core::channels::{
    choi_proxy_distance, compose_channels, dme_step, invert_channel, lcu_difference_channels,
    qsvt_channel, sampling_to_block_encoding, ChannelModel, SamplingMode,
};
use tdsim_core::config::SIGN_POLY_ETA;
use tdsim_core::estimators::{qae_draw, qae_error_bound, BackendMode};
use tdsim_core::fixtures::{gen_low_rank, gen_pure};
use tdsim_core::linalg::{
    rank_delta, trace_distance_exact, w_small_eigen, Operator,
};
use tdsim_core::poly_svt::{eval_poly, sign_poly, OddPolynomial};
use tdsim_core::rng::RngStream;

use crate::sweep::{run_sweep, SweepAxis, SweepMode, SweepPlan};

/// Deliberate corruptions for negative-control runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaultInjection {
    /// Perturb the sign polynomial before certification, so the
    /// polynomial criterion must fail.
    SignPolyCertificate,
}

impl std::str::FromStr for FaultInjection {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sign-poly" => Ok(Self::SignPolyCertificate),
            other => Err(format!("unknown fault '{other}' (expected 'sign-poly')")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub tags: &'static [&'static str],
    pub passed: bool,
    pub detail: String,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {:<22} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail
        )
    }
}

type Body = fn(Option<FaultInjection>) -> Result<String, String>;

struct Criterion {
    id: usize,
    name: &'static str,
    tags: &'static [&'static str],
    body: Body,
}

const CRITERIA: &[Criterion] = &[
    Criterion {
        id: 1,
        name: "identity-suite",
        tags: &["identity"],
        body: criterion_identity,
    },
    Criterion {
        id: 2,
        name: "sign-poly-certificates",
        tags: &["sign-poly"],
        body: criterion_sign_poly,
    },
    Criterion {
        id: 3,
        name: "purified-accuracy",
        tags: &["purified"],
        body: criterion_purified_accuracy,
    },
    Criterion {
        id: 4,
        name: "purified-scaling",
        tags: &["purified", "scaling"],
        body: criterion_purified_scaling,
    },
    Criterion {
        id: 5,
        name: "sample-accuracy",
        tags: &["samples"],
        body: criterion_sample_accuracy,
    },
    Criterion {
        id: 6,
        name: "channel-calibration",
        tags: &["channels"],
        body: criterion_channel_calibration,
    },
    Criterion {
        id: 7,
        name: "dme-primitive",
        tags: &["dme", "channels"],
        body: criterion_dme,
    },
    Criterion {
        id: 8,
        name: "approx-low-rank",
        tags: &["approx-low-rank"],
        body: criterion_approx_low_rank,
    },
    Criterion {
        id: 9,
        name: "pure-state-suite",
        tags: &["appendix", "swap"],
        body: criterion_pure_state,
    },
    Criterion {
        id: 10,
        name: "qae-contract",
        tags: &["qae"],
        body: criterion_qae,
    },
];

/// Run the acceptance criteria, optionally filtering by tag substring and
/// injecting a fault for negative controls.
pub fn run_acceptance(only: Option<&str>, fault: Option<FaultInjection>) -> Vec<CriterionResult> {
    CRITERIA
        .iter()
        .filter(|c| match only {
            None => true,
            Some(tag) => c.tags.iter().any(|t| t.contains(tag)) || c.id.to_string() == tag,
        })
        .map(|c| {
            let outcome = (c.body)(fault);
            CriterionResult {
                id: c.id,
                name: c.name,
                tags: c.tags,
                passed: outcome.is_ok(),
                detail: match outcome {
                    Ok(d) => d,
                    Err(d) => d,
                },
            }
        })
        .collect()
}

fn criterion_identity(_fault: Option<FaultInjection>) -> Result<String, String> {
    let s = RngStream::root(0xACC1).child("identity");
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let n = 1 + seed % 3;
        let max_r = (1usize << n).min(4);
        let ra = 1 + seed % max_r;
        let rb = 1 + (seed / 7) % max_r;
        let a = gen_low_rank(n, ra, &s.child_indexed("a", seed))
            .map_err(|e| e.to_string())?
            .state;
        let b = gen_low_rank(n, rb, &s.child_indexed("b", seed))
            .map_err(|e| e.to_string())?
            .state;
        let gap = (sign_route_trace_distance(&a, &b).map_err(|e| e.to_string())?
            - trace_distance_exact(&a, &b).map_err(|e| e.to_string())?)
        .abs();
        worst = worst.max(gap);
    }
    if worst < 1e-8 {
        Ok(format!("sign-route identity on 100 pairs, worst gap {worst:.2e}"))
    } else {
        Err(format!("identity gap {worst:.2e} exceeds 1e-8"))
    }
}

/// Independent certification grid used by the acceptance check (distinct
/// from the constructor's internal grid).
fn recertify(
    p: &OddPolynomial,
    delta: f64,
    eps: f64,
) -> Result<(f64, f64), String> {
    let points = 10_001usize;
    let mut sup: f64 = 0.0;
    let mut dev: f64 = 0.0;
    for i in 0..points {
        let x = -2.0 + 4.0 * i as f64 / (points - 1) as f64;
        let v = eval_poly(p, x).map_err(|e| e.to_string())?;
        sup = sup.max(v.abs());
        if x.abs() >= delta {
            dev = dev.max((v - x.signum()).abs());
        }
    }
    let _ = eps;
    Ok((sup, dev))
}

fn criterion_sign_poly(fault: Option<FaultInjection>) -> Result<String, String> {
    let mut max_ratio = 0.0f64;
    for &delta in &[0.2, 0.1, 0.05] {
        for &eps in &[0.1, 0.01] {
            let mut p = sign_poly(delta, eps).map_err(|e| e.to_string())?;
            if fault == Some(FaultInjection::SignPolyCertificate) {
                let mut coeffs = p.odd_coeffs().to_vec();
                coeffs[0] *= 1.05;
                p = OddPolynomial::from_odd_coeffs(coeffs).map_err(|e| e.to_string())?;
            }
            let (sup, dev) = recertify(&p, delta, eps)?;
            if sup > 1.0 + 1e-12 {
                return Err(format!(
                    "|p| reaches {sup} > 1 at (delta, eps) = ({delta}, {eps})"
                ));
            }
            if dev > eps {
                return Err(format!(
                    "sign deviation {dev} exceeds eps at (delta, eps) = ({delta}, {eps})"
                ));
            }
            let bound = SIGN_POLY_ETA * (1.0 / eps).ln() / delta;
            let ratio = p.degree() as f64 / bound;
            max_ratio = max_ratio.max(ratio);
            if p.degree() as f64 > bound {
                return Err(format!(
                    "degree {} exceeds eta bound {bound:.1} at ({delta}, {eps})",
                    p.degree()
                ));
            }
        }
    }
    Ok(format!(
        "6 cells certified; worst degree at {:.0}% of the eta bound",
        max_ratio * 100.0
    ))
}

fn criterion_purified_accuracy(_fault: Option<FaultInjection>) -> Result<String, String> {
    let s = RngStream::root(0xACC3).child("pairs");
    let eps = 0.05;
    let mut within = 0;
    for seed in 0..100 {
        let a = gen_low_rank(3, 2, &s.child_indexed("a", seed))
            .map_err(|e| e.to_string())?
            .state;
        let b = gen_low_rank(3, 2, &s.child_indexed("b", seed))
            .map_err(|e| e.to_string())?
            .state;
        let cfg = EstimationConfig::new(eps, 30_000 + seed as u64)
            .map_err(|e| e.to_string())?
            .with_rank_bound(2)
            .with_backend(BackendMode::Qae);
        let rep = estimate_purified_states(&a, &b, &cfg).map_err(|e| e.to_string())?;
        if rep.abs_error <= eps {
            within += 1;
        }
    }
    let mut control_within = 0;
    for seed in 0..100 {
        let a = gen_low_rank(3, 2, &s.child_indexed("ctl", seed))
            .map_err(|e| e.to_string())?
            .state;
        let cfg = EstimationConfig::new(eps, 40_000 + seed as u64)
            .map_err(|e| e.to_string())?
            .with_rank_bound(2)
            .with_backend(BackendMode::Qae);
        let rep = estimate_purified_states(&a, &a, &cfg).map_err(|e| e.to_string())?;
        if rep.estimate.abs() <= eps {
            control_within += 1;
        }
    }
    if within >= 90 && control_within >= 95 {
        Ok(format!(
            "{within}/100 pairs within eps, {control_within}/100 equal-state controls within eps"
        ))
    } else {
        Err(format!(
            "accuracy {within}/100 (need 90) or control {control_within}/100 (need 95) too low"
        ))
    }
}

fn criterion_purified_scaling(_fault: Option<FaultInjection>) -> Result<String, String> {
    let eps_plan = SweepPlan {
        axis: SweepAxis::Eps,
        grid: vec![0.2, 0.1, 0.05, 0.025],
        trials: 1,
        n: 2,
        rank: 2,
        eps: 0.0,
        mode: SweepMode::Purified,
        backend: Some(BackendMode::Qae),
        seed_base: 50_000,
        median_k: 9,
    };
    let eps_out = run_sweep(&eps_plan, None).map_err(|e| e.to_string())?;
    let eps_slope = eps_out.summary.lognorm_slope;

    let rank_plan = SweepPlan {
        axis: SweepAxis::Rank,
        grid: vec![1.0, 2.0, 4.0],
        trials: 1,
        n: 2,
        rank: 0,
        eps: 0.1,
        mode: SweepMode::Purified,
        backend: Some(BackendMode::Qae),
        seed_base: 51_000,
        median_k: 9,
    };
    let rank_out = run_sweep(&rank_plan, None).map_err(|e| e.to_string())?;
    let rank_slope = rank_out.summary.raw_slope;

    if (1.8..=2.2).contains(&eps_slope) && (0.8..=1.2).contains(&rank_slope) {
        Ok(format!(
            "query exponents: vs 1/eps {eps_slope:.2} (in 2 +- 0.2), vs rank {rank_slope:.2} (in 1 +- 0.2)"
        ))
    } else {
        Err(format!(
            "slope out of window: vs 1/eps {eps_slope:.2} (need 1.8..2.2), vs rank {rank_slope:.2} (need 0.8..1.2)"
        ))
    }
}

fn criterion_sample_accuracy(_fault: Option<FaultInjection>) -> Result<String, String> {
    let s = RngStream::root(0xACC5).child("pairs");
    let eps = 0.1;
    let mut within = 0;
    let mut worst_proxy_margin = f64::INFINITY;
    for seed in 0..100usize {
        let a = gen_low_rank(2, 2, &s.child_indexed("a", seed))
            .map_err(|e| e.to_string())?
            .state;
        let b = gen_low_rank(2, 2, &s.child_indexed("b", seed))
            .map_err(|e| e.to_string())?
            .state;
        let cfg = EstimationConfig::new(eps, 60_000 + seed as u64)
            .map_err(|e| e.to_string())?
            .with_rank_bound(2);
        let rep = estimate_samples(&a, &b, &cfg).map_err(|e| e.to_string())?;
        if rep.abs_error <= eps {
            within += 1;
        }
        if rep.budget_warning {
            return Err(format!("budget overflow at seed {seed}"));
        }
        // measured Choi proxies on a fixed subsample (the elementary
        // channels and the transformed composite are small enough to
        // diagonalize; the full combination register is bounded
        // analytically by the same mixture argument)
        if seed % 25 == 0 {
            let delta = rep.channel_delta.unwrap();
            let e_a = sampling_to_block_encoding(&a, delta, SamplingMode::NoisyOracle, "rho")
                .map_err(|e| e.to_string())?;
            let ideal = ChannelModel::unitary(e_a.target().clone()).map_err(|e| e.to_string())?;
            let proxy = choi_proxy_distance(&e_a, &ideal).map_err(|e| e.to_string())?;
            if proxy > delta {
                return Err(format!("elementary proxy {proxy} exceeds delta {delta}"));
            }
            let e_b = sampling_to_block_encoding(&b, delta, SamplingMode::NoisyOracle, "sigma")
                .map_err(|e| e.to_string())?;
            let e_nu = lcu_difference_channels(&e_a, &e_b).map_err(|e| e.to_string())?;
            let poly = sign_poly(rep.delta_p, rep.eps_p).map_err(|e| e.to_string())?;
            let e_psv = qsvt_channel(&poly, &e_nu).map_err(|e| e.to_string())?;
            let ideal_psv =
                ChannelModel::unitary(e_psv.target().clone()).map_err(|e| e.to_string())?;
            let proxy_psv = choi_proxy_distance(&e_psv, &ideal_psv).map_err(|e| e.to_string())?;
            if proxy_psv > e_psv.delta_budget() {
                return Err(format!(
                    "composite proxy {proxy_psv} exceeds declared {}",
                    e_psv.delta_budget()
                ));
            }
            worst_proxy_margin = worst_proxy_margin.min(e_psv.delta_budget() - proxy_psv);
        }
    }
    if within >= 85 {
        Ok(format!(
            "{within}/100 pairs within eps; Choi proxies inside budgets (min margin {worst_proxy_margin:.2e})"
        ))
    } else {
        Err(format!("accuracy {within}/100 below 85"))
    }
}

fn criterion_channel_calibration(_fault: Option<FaultInjection>) -> Result<String, String> {
    let s = RngStream::root(0xACC6).child("calib");
    let mut worst_ratio = 0.0f64;
    for (i, &n) in [1usize, 2].iter().enumerate() {
        let rho = gen_low_rank(n, 2, &s.child_indexed("r", i))
            .map_err(|e| e.to_string())?
            .state;
        for &delta in &[0.02, 0.05, 0.1, 0.2] {
            let e = sampling_to_block_encoding(&rho, delta, SamplingMode::NoisyOracle, "rho")
                .map_err(|e| e.to_string())?;
            let ideal = ChannelModel::unitary(e.target().clone()).map_err(|e| e.to_string())?;
            let proxy = choi_proxy_distance(&e, &ideal).map_err(|e| e.to_string())?;
            if proxy > delta {
                return Err(format!("proxy {proxy} exceeds delta {delta} at n = {n}"));
            }
            worst_ratio = worst_ratio.max(proxy / delta);
        }
    }
    // inverse criterion at delta = 0
    let rho = gen_low_rank(1, 2, &s.child("inv")).map_err(|e| e.to_string())?.state;
    let e = sampling_to_block_encoding(&rho, 0.0, SamplingMode::NoisyOracle, "rho")
        .map_err(|e| e.to_string())?;
    let inv = invert_channel(&e).map_err(|e| e.to_string())?;
    let comp = compose_channels(&inv, &e).map_err(|e| e.to_string())?;
    let id = ChannelModel::identity(comp.target().qubits().map_err(|e| e.to_string())?);
    let gap = comp
        .choi()
        .map_err(|e| e.to_string())?
        .sub(&id.choi().map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?
        .max_abs_diff(&Operator::zeros(
            comp.target().dim() * comp.target().dim(),
        ));
    if gap < 1e-9 {
        Ok(format!(
            "proxy/delta peaks at {worst_ratio:.3} across the grid; zero-budget inverse composes to identity ({gap:.1e})"
        ))
    } else {
        Err(format!("inverse composition misses identity by {gap:.2e}"))
    }
}

fn criterion_dme(_fault: Option<FaultInjection>) -> Result<String, String> {
    let s = RngStream::root(0xACC7).child("dme");
    for seed in 0..5 {
        let copy = gen_low_rank(1, 2, &s.child_indexed("c", seed))
            .map_err(|e| e.to_string())?
            .state;
        let work = gen_low_rank(1, 2, &s.child_indexed("w", seed))
            .map_err(|e| e.to_string())?
            .state;
        let c_oracle = copy
            .op()
            .sub(work.op())
            .map_err(|e| e.to_string())?
            .op_norm()
            + 0.5;
        for &dt in &[1e-2, 1e-3] {
            let out = dme_step(&copy, &work, dt).map_err(|e| e.to_string())?;
            let comm = copy
                .op()
                .mul(work.op())
                .map_err(|e| e.to_string())?
                .sub(&work.op().mul(copy.op()).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
            let first = work
                .op()
                .add(&comm.scale(num_complex::Complex64::new(0.0, -dt)))
                .map_err(|e| e.to_string())?;
            let resid = out
                .op()
                .sub(&first)
                .map_err(|e| e.to_string())?
                .op_norm();
            if resid > c_oracle * dt * dt {
                return Err(format!(
                    "first-order residual {resid:.3e} exceeds {c_oracle:.2} * dt^2 at dt = {dt}"
                ));
            }
        }
        let fixed = dme_step(&copy, &copy, 0.37).map_err(|e| e.to_string())?;
        let gap = fixed.op().max_abs_diff(copy.op());
        if gap > 1e-12 {
            return Err(format!("fixed point moved by {gap:.2e}"));
        }
    }
    Ok("first-order residuals within the second-order envelope; fixed points exact".into())
}

fn criterion_approx_low_rank(_fault: Option<FaultInjection>) -> Result<String, String> {
    let s = RngStream::root(0xACC8).child("alr");
    for seed in 0..100 {
        let a = gen_low_rank(2, 1 + seed % 3, &s.child_indexed("a", seed))
            .map_err(|e| e.to_string())?
            .state;
        let b = gen_low_rank(2, 1 + (seed / 2) % 3, &s.child_indexed("b", seed))
            .map_err(|e| e.to_string())?
            .state;
        let delta = [0.02, 0.05, 0.1][seed % 3];
        let composed =
            approx_low_rank_difference(&a, &b, delta).map_err(|e| e.to_string())?;
        let nu = a
            .op()
            .sub(b.op())
            .map_err(|e| e.to_string())?
            .scale_re(0.5);
        let mr = rank_delta(&nu, composed.threshold).map_err(|e| e.to_string())?;
        let mw = w_small_eigen(&nu, composed.threshold).map_err(|e| e.to_string())?;
        if mr > composed.rank_bound || mw > composed.mass_bound + 1e-12 {
            return Err(format!(
                "composed bounds violated at seed {seed}: rank {mr}/{}, mass {mw:.3e}/{:.3e}",
                composed.rank_bound, composed.mass_bound
            ));
        }
    }

    // selector formula checks
    for (r, eps) in [(2usize, 0.1f64), (4, 0.05)] {
        let p = ApproxLowRankProfile::ExactLowRank { r };
        let dp = choose_delta_p_profile(&p, &p, eps).map_err(|e| e.to_string())?;
        if (dp - eps / (4.0 * r as f64)).abs() > 1e-15 {
            return Err(format!("exact-profile selector gave {dp}, expected eps/4r"));
        }
    }
    for (n, r) in [(3usize, 2usize), (4, 4)] {
        let eps = 0.1;
        let dim = 1usize << n;
        let lambda = eps / 100.0;
        let p = ApproxLowRankProfile::Depolarized { r, lambda, dim };
        let nf = dim as f64;
        let d1 = (eps / 8.0 - lambda * (nf - r as f64) / nf) / r as f64;
        let expect = 2.0 * d1.min(eps / (8.0 * r as f64));
        let dp = choose_delta_p_profile(&p, &p, eps).map_err(|e| e.to_string())?;
        if (dp - expect).abs() > 1e-15 {
            return Err(format!(
                "depolarized selector gave {dp}, expected {expect} at (n, r) = ({n}, {r})"
            ));
        }
    }
    let mut ratios = Vec::new();
    for &eps in &[0.2f64, 0.1, 0.05] {
        let c = 1.0;
        let dim = 64usize;
        let profile = ApproxLowRankProfile::PowerLaw { c, dim };
        let base = eps / 8.0 + c / (dim as f64 - 1.0);
        let d1 = c * (base / (base + c)).powi(2);
        let expect = 2.0 * d1.min(eps / (8.0 * profile.r_bound(d1)));
        let dp = choose_delta_p_profile(&profile, &profile, eps).map_err(|e| e.to_string())?;
        if (dp - expect).abs() > 1e-15 {
            return Err(format!(
                "power-law selector gave {dp}, expected {expect} at eps = {eps}"
            ));
        }
        ratios.push(dp / (eps * eps));
    }
    let band = ratios.iter().cloned().fold(f64::MIN, f64::max)
        / ratios.iter().cloned().fold(f64::MAX, f64::min);
    if band > 4.0 {
        return Err(format!("power-law selector not Theta(eps^2): band {band:.2}"));
    }
    Ok(format!(
        "composed bounds hold on 100 pairs; selector formulas match (eps^2 band {band:.2})"
    ))
}

fn criterion_pure_state(_fault: Option<FaultInjection>) -> Result<String, String> {
    // propagation bound on 200 seeded pure pairs across both proof branches
    let s = RngStream::root(0xACC9).child("bound");
    let mut high = 0usize;
    let mut low = 0usize;
    for seed in 0..200 {
        let stream = s.child_indexed("case", seed);
        let mut rng = stream.rng();
        use rand::Rng;
        let f2: f64 = if seed % 2 == 0 {
            rng.gen()
        } else {
            1.0 - rng.gen::<f64>() * 1e-3
        };
        let t = (1.0 - f2).sqrt();
        for &delta in &[1e-4, 0.01, 0.05] {
            let u: f64 = rng.gen::<f64>() * 2.0 - 1.0;
            let x = (f2 + u * delta).clamp(0.0, 1.0);
            if x.min(f2) > 1.0 - delta {
                high += 1;
            } else {
                low += 1;
            }
            let est = (1.0 - x).max(0.0).sqrt();
            if (est - t).abs() > 2.0 * delta.sqrt() + 1e-12 {
                return Err(format!(
                    "propagation bound violated: f2 = {f2:.4}, delta = {delta}"
                ));
            }
        }
    }
    if high == 0 || low == 0 {
        return Err("one of the proof branches was never exercised".into());
    }

    // estimator accuracy over seeds
    let s2 = RngStream::root(0xACCA).child("swap");
    let eps = 0.15;
    let mut within = 0;
    let trials = 50;
    for seed in 0..trials {
        let psi = gen_pure(2, &s2.child_indexed("psi", seed))
            .map_err(|e| e.to_string())?
            .state;
        let phi = gen_pure(2, &s2.child_indexed("phi", seed))
            .map_err(|e| e.to_string())?
            .state;
        let o_psi = purify(&psi, "O_psi").map_err(|e| e.to_string())?;
        let o_phi = purify(&phi, "O_phi").map_err(|e| e.to_string())?;
        let cfg = EstimationConfig::new(eps, 70_000 + seed as u64).map_err(|e| e.to_string())?;
        let rep = swap_test_pure(&o_psi, &o_phi, eps, &cfg).map_err(|e| e.to_string())?;
        if rep.abs_error <= eps {
            within += 1;
        }
    }
    if within * 10 < trials * 9 {
        return Err(format!("swap estimator: only {within}/{trials} within eps"));
    }

    // route consistency on shared seeds
    let s3 = RngStream::root(0xACCB).child("routes");
    let mut agree = 0;
    let route_trials = 20;
    for seed in 0..route_trials {
        let psi = gen_pure(1, &s3.child_indexed("psi", seed))
            .map_err(|e| e.to_string())?
            .state;
        let phi = gen_pure(1, &s3.child_indexed("phi", seed))
            .map_err(|e| e.to_string())?
            .state;
        let o_psi = purify(&psi, "O_psi").map_err(|e| e.to_string())?;
        let o_phi = purify(&phi, "O_phi").map_err(|e| e.to_string())?;
        let eps_r = 0.1;
        let cfg = EstimationConfig::new(eps_r, 80_000 + seed as u64).map_err(|e| e.to_string())?;
        let swap = swap_test_pure(&o_psi, &o_phi, eps_r, &cfg).map_err(|e| e.to_string())?;
        let cfg2 = EstimationConfig::new(eps_r, 80_000 + seed as u64)
            .map_err(|e| e.to_string())?
            .with_rank_bound(1);
        let purified = estimate_purified_states(&psi, &phi, &cfg2).map_err(|e| e.to_string())?;
        if (swap.estimate - purified.estimate).abs() <= 2.0 * eps_r {
            agree += 1;
        }
    }
    if agree * 10 < route_trials * 9 {
        return Err(format!(
            "route consistency: only {agree}/{route_trials} within 2 eps"
        ));
    }
    Ok(format!(
        "bound holds on 200 pairs (branches {high}/{low}); {within}/{trials} swap runs within eps; {agree}/{route_trials} routes agree"
    ))
}

fn criterion_qae(_fault: Option<FaultInjection>) -> Result<String, String> {
    let mut held = 0;
    let total = 200;
    for seed in 0..total {
        let s = RngStream::root(0xACCC).child_indexed("case", seed);
        use rand::Rng;
        let p: f64 = s.child("p").rng().gen();
        let m = 8usize << (seed % 6);
        let est = qae_draw(p, m, &s.child("draw"));
        if (est - p).abs() <= qae_error_bound(p, m) {
            held += 1;
        }
    }
    let freq = held as f64 / total as f64;
    let threshold = 8.0 / std::f64::consts::PI.powi(2) - 0.05;
    if freq < threshold {
        return Err(format!("error-law frequency {freq:.3} below {threshold:.3}"));
    }
    // on-grid phases recovered exactly
    for (i, &m) in [16usize, 32, 64].iter().enumerate() {
        let y0 = 3 + i;
        let p = (std::f64::consts::PI * y0 as f64 / m as f64).sin().powi(2);
        for trial in 0..10 {
            let s = RngStream::root(0xACCD).child_indexed("grid", i * 100 + trial);
            let est = qae_draw(p, m, &s);
            if est != p {
                return Err(format!("on-grid phase not exact: m = {m}, trial {trial}"));
            }
        }
    }
    Ok(format!(
        "error law held with frequency {freq:.3} (threshold {threshold:.3}); on-grid phases exact"
    ))
}
