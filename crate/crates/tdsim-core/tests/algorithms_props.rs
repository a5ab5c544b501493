//! End-to-end properties of the estimation algorithms: the sign-route
//! identity, threshold selection formulas, the composed low-rank bounds,
//! the pure-state estimator, and exact ledger bookkeeping.

use rand::Rng;
use tdsim_core::algorithms::{
    approx_low_rank_difference, choose_delta_p_profile, choose_delta_p_rank, estimate_purified_states,
    estimate_samples, sign_route_trace_distance, swap_test_pure, ApproxLowRankProfile,
    EstimationConfig,
};
use tdsim_core::block_encoding::purify;
use tdsim_core::channels::samples_per_channel_use;
use tdsim_core::config::QSVT_GAMMA;
use tdsim_core::estimators::{shots_for, BackendMode};
use tdsim_core::fixtures::{gen_low_rank, gen_pure};
use tdsim_core::linalg::{
    rank_delta, trace_distance_exact, w_small_eigen, DensityOperator,
};
use tdsim_core::poly_svt::sign_poly;
use tdsim_core::rng::RngStream;

#[test]
fn sign_route_identity_on_hundred_seeded_pairs() {
    let s = RngStream::root(900).child("identity");
    for seed in 0..100 {
        let n = 1 + seed % 3;
        let max_r = (1usize << n).min(4);
        let ra = 1 + seed % max_r;
        let rb = 1 + (seed / 3) % max_r;
        let a = gen_low_rank(n, ra, &s.child_indexed("a", seed)).unwrap().state;
        let b = gen_low_rank(n, rb, &s.child_indexed("b", seed)).unwrap().state;
        let via_sign = sign_route_trace_distance(&a, &b).unwrap();
        let exact = trace_distance_exact(&a, &b).unwrap();
        assert!(
            (via_sign - exact).abs() < 1e-8,
            "identity gap {} at seed {seed}",
            (via_sign - exact).abs()
        );
    }
}

#[test]
fn rank_threshold_guarantees_mass_precondition() {
    // for rank <= r pairs, w(nu, eps/8r) <= eps/4 always
    let s = RngStream::root(901).child("precondition");
    for seed in 0..100 {
        let n = 1 + seed % 2;
        let r = 1 + seed % 2;
        let eps = [0.05, 0.1, 0.2][seed % 3];
        let a = gen_low_rank(n, r, &s.child_indexed("a", seed)).unwrap().state;
        let b = gen_low_rank(n, r, &s.child_indexed("b", seed)).unwrap().state;
        let nu = a.op().sub(b.op()).unwrap().scale_re(0.5);
        let delta_p = choose_delta_p_rank(r, eps).unwrap();
        let w = w_small_eigen(&nu, delta_p).unwrap();
        assert!(
            w <= eps / 4.0 + 1e-12,
            "w = {w} exceeds eps/4 = {} at seed {seed}",
            eps / 4.0
        );
    }
}

#[test]
fn composed_low_rank_bounds_hold_on_seeded_pairs() {
    let s = RngStream::root(902).child("composed");
    for seed in 0..100 {
        let n = 2;
        let a = gen_low_rank(n, 1 + seed % 3, &s.child_indexed("a", seed))
            .unwrap()
            .state;
        let b = gen_low_rank(n, 1 + (seed / 2) % 3, &s.child_indexed("b", seed))
            .unwrap()
            .state;
        let delta = [0.02, 0.05, 0.1][seed % 3];
        let composed = approx_low_rank_difference(&a, &b, delta).unwrap();
        let nu = a.op().sub(b.op()).unwrap().scale_re(0.5);
        let measured_rank = rank_delta(&nu, composed.threshold).unwrap();
        let measured_mass = w_small_eigen(&nu, composed.threshold).unwrap();
        assert!(
            measured_rank <= composed.rank_bound,
            "rank {measured_rank} exceeds bound {} at seed {seed}",
            composed.rank_bound
        );
        assert!(
            measured_mass <= composed.mass_bound + 1e-12,
            "mass {measured_mass} exceeds bound {} at seed {seed}",
            composed.mass_bound
        );
    }
}

#[test]
fn selector_reproduces_exact_low_rank_formula() {
    for (r, eps) in [(1usize, 0.2f64), (2, 0.1), (4, 0.05), (8, 0.01)] {
        let p = ApproxLowRankProfile::ExactLowRank { r };
        let dp = choose_delta_p_profile(&p, &p, eps).unwrap();
        assert!(
            (dp - eps / (4.0 * r as f64)).abs() < 1e-15,
            "r = {r}, eps = {eps}"
        );
    }
}

#[test]
fn selector_reproduces_depolarized_formula() {
    // lambda = eps / 100: the profile picks the rank branch and
    // delta_p = 2 min(delta_1, eps / 8r) with
    // delta_1 = (eps/8 - lambda (N - r)/N) / r
    for (n, r, eps) in [(3usize, 2usize, 0.1f64), (4, 4, 0.05), (2, 1, 0.2)] {
        let dim = 1usize << n;
        let lambda = eps / 100.0;
        let p = ApproxLowRankProfile::Depolarized { r, lambda, dim };
        let n_f = dim as f64;
        let delta_1 = (eps / 8.0 - lambda * (n_f - r as f64) / n_f) / r as f64;
        let expected = 2.0 * delta_1.min(eps / (8.0 * p.r_bound(delta_1)));
        let dp = choose_delta_p_profile(&p, &p, eps).unwrap();
        assert!(
            (dp - expected).abs() < 1e-15,
            "n = {n}, r = {r}, eps = {eps}: got {dp}, expected {expected}"
        );
        // the scale is Theta(eps / r)
        let ratio = dp / (eps / r as f64);
        assert!((0.05..=2.0).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn selector_reproduces_power_law_formula_and_scale() {
    let dim = 64usize;
    let c = 1.0;
    let profile = ApproxLowRankProfile::PowerLaw { c, dim };
    let mut ratios = Vec::new();
    for &eps in &[0.2f64, 0.1, 0.05] {
        let base = eps / 8.0 + c / (dim as f64 - 1.0);
        let delta_1 = c * (base / (base + c)).powi(2);
        let r_1 = profile.r_bound(delta_1);
        let expected = 2.0 * delta_1.min(eps / (8.0 * r_1));
        let dp = choose_delta_p_profile(&profile, &profile, eps).unwrap();
        assert!(
            (dp - expected).abs() < 1e-15,
            "eps = {eps}: got {dp}, expected {expected}"
        );
        ratios.push(dp / (eps * eps));
    }
    // Theta(eps^2): the eps^2-normalized selector stays within a constant band
    let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
    assert!(
        max / min < 4.0,
        "eps^2 scaling band too wide: {ratios:?}"
    );
}

#[test]
fn selector_reproduces_gibbs_formula() {
    // feasibility needs eps to clear the thermal floor e^{-gap} N / k
    let dim = 16usize;
    let k = 2usize;
    let gap = 7.0f64;
    let profile = ApproxLowRankProfile::Gibbs { k, gap, dim };
    let eps = 0.1;
    let floor = 1.0 / (gap.exp() * k as f64 + 1.0);
    let delta_1 = (eps / 8.0 - (dim as f64 - k as f64) * floor) / k as f64;
    assert!(delta_1 > floor, "example parameters must sit on the gapped branch");
    let expected = 2.0 * delta_1.min(eps / (8.0 * k as f64));
    let dp = choose_delta_p_profile(&profile, &profile, eps).unwrap();
    assert!((dp - expected).abs() < 1e-15);
}

#[test]
fn swap_bound_holds_on_both_proof_branches() {
    // |sqrt(1 - x) - T| <= 2 sqrt(delta) whenever |x - F^2| <= delta
    let s = RngStream::root(903).child("branches");
    let mut branch_high = 0usize;
    let mut branch_low = 0usize;
    for seed in 0..200 {
        let stream = s.child_indexed("case", seed);
        let mut rng = stream.child("u").rng();
        // half the cases: nearly parallel states (high-overlap branch)
        let f2: f64 = if seed % 2 == 0 {
            rng.gen::<f64>()
        } else {
            1.0 - rng.gen::<f64>() * 1e-3
        };
        let t = (1.0 - f2).sqrt();
        for &delta in &[1e-4, 1e-2, 0.05] {
            let u: f64 = rng.gen::<f64>() * 2.0 - 1.0;
            let x = (f2 + u * delta).clamp(0.0, 1.0);
            if x.min(f2) > 1.0 - delta {
                branch_high += 1;
            } else {
                branch_low += 1;
            }
            let est = (1.0 - x).max(0.0).sqrt();
            assert!(
                (est - t).abs() <= 2.0 * delta.sqrt() + 1e-12,
                "bound violated: f2 = {f2}, delta = {delta}, x = {x}"
            );
        }
    }
    assert!(branch_high > 0, "high-overlap branch never exercised");
    assert!(branch_low > 0, "generic branch never exercised");
}

#[test]
fn swap_test_known_overlap_case() {
    // |0> vs |+>: T = 1/sqrt(2)
    let zero = DensityOperator::basis_state(1, 0).unwrap();
    let plus = {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        DensityOperator::from_pure(&[
            num_complex::Complex64::new(s, 0.0),
            num_complex::Complex64::new(s, 0.0),
        ])
        .unwrap()
    };
    let o_zero = purify(&zero, "O_psi").unwrap();
    let o_plus = purify(&plus, "O_phi").unwrap();
    let eps = 0.1;
    let cfg = EstimationConfig::new(eps, 17).unwrap();
    let rep = swap_test_pure(&o_zero, &o_plus, eps, &cfg).unwrap();
    let t = std::f64::consts::FRAC_1_SQRT_2;
    assert!((rep.exact - t).abs() < 1e-12);
    assert!(
        (rep.estimate - t).abs() <= eps,
        "estimate {} vs {t}",
        rep.estimate
    );
}

#[test]
fn swap_test_accuracy_over_seeds() {
    let s = RngStream::root(904).child("swap");
    let eps = 0.15;
    let mut within = 0;
    let trials = 40;
    for seed in 0..trials {
        let psi = gen_pure(2, &s.child_indexed("psi", seed)).unwrap().state;
        let phi = gen_pure(2, &s.child_indexed("phi", seed)).unwrap().state;
        let o_psi = purify(&psi, "O_psi").unwrap();
        let o_phi = purify(&phi, "O_phi").unwrap();
        let cfg = EstimationConfig::new(eps, 1000 + seed as u64).unwrap();
        let rep = swap_test_pure(&o_psi, &o_phi, eps, &cfg).unwrap();
        if rep.abs_error <= eps {
            within += 1;
        }
    }
    assert!(
        within * 10 >= trials * 9,
        "only {within}/{trials} within eps"
    );
}

#[test]
fn pure_state_routes_agree_within_twice_eps() {
    let s = RngStream::root(905).child("routes");
    let eps = 0.1;
    let mut agree = 0;
    let trials = 20;
    for seed in 0..trials {
        let psi = gen_pure(1, &s.child_indexed("psi", seed)).unwrap().state;
        let phi = gen_pure(1, &s.child_indexed("phi", seed)).unwrap().state;
        let o_psi = purify(&psi, "O_psi").unwrap();
        let o_phi = purify(&phi, "O_phi").unwrap();
        let cfg = EstimationConfig::new(eps, 2000 + seed as u64).unwrap();
        let swap = swap_test_pure(&o_psi, &o_phi, eps, &cfg).unwrap();
        let cfg2 = EstimationConfig::new(eps, 2000 + seed as u64)
            .unwrap()
            .with_rank_bound(1);
        let purified = estimate_purified_states(&psi, &phi, &cfg2).unwrap();
        if (swap.estimate - purified.estimate).abs() <= 2.0 * eps {
            agree += 1;
        }
    }
    assert!(agree * 10 >= trials * 9, "only {agree}/{trials} agreed");
}

#[test]
fn sample_path_ledger_matches_closed_form() {
    let s = RngStream::root(906).child("bookkeeping");
    let a = gen_low_rank(1, 2, &s.child("a")).unwrap().state;
    let b = gen_low_rank(1, 2, &s.child("b")).unwrap().state;
    let eps = 0.2;
    let cfg = EstimationConfig::new(eps, 31).unwrap().with_rank_bound(2);
    let rep = estimate_samples(&a, &b, &cfg).unwrap();

    let poly = sign_poly(rep.delta_p, rep.eps_p).unwrap();
    let q = QSVT_GAMMA * poly.degree() as u64;
    let k_delta = samples_per_channel_use(rep.channel_delta.unwrap());
    let shots = shots_for(rep.eps_h);
    let k_reps = rep.median_k as u64;
    // each term runs K reps of `shots` channel uses; each use burns
    // q * k_delta copies of each state, plus one fresh test copy per shot
    let expect_samples_rho = 2 * k_reps * shots * q * k_delta + k_reps * shots;
    assert_eq!(rep.ledger.get("samples_rho").copied().unwrap_or(0), expect_samples_rho);
    assert_eq!(
        rep.ledger.get("samples_sigma").copied().unwrap_or(0),
        expect_samples_rho
    );
    assert_eq!(rep.ledger.get("E_psv").copied().unwrap_or(0), 2 * k_reps * shots);
    assert_eq!(
        rep.ledger.get("E_rho").copied().unwrap_or(0),
        2 * k_reps * shots * q
    );
    assert_eq!(rep.samples_total, 2 * expect_samples_rho);
}

#[test]
fn sample_path_accuracy_single_seed() {
    let s = RngStream::root(907).child("acc");
    let a = gen_low_rank(2, 2, &s.child("a")).unwrap().state;
    let b = gen_low_rank(2, 2, &s.child("b")).unwrap().state;
    let cfg = EstimationConfig::new(0.1, 5).unwrap().with_rank_bound(2);
    let rep = estimate_samples(&a, &b, &cfg).unwrap();
    assert!(
        rep.abs_error <= 0.1,
        "estimate {} vs exact {}",
        rep.estimate,
        rep.exact
    );
    assert!(!rep.budget_warning);
    assert!(rep.precondition_ok);
}

#[test]
fn purified_full_pipeline_runs_on_equal_inputs() {
    // bitwise-equal states must still run the whole pipeline: the report
    // shows queries were spent and the polynomial was built
    let s = RngStream::root(908).child("equal");
    let a = gen_low_rank(2, 2, &s).unwrap().state;
    let cfg = EstimationConfig::new(0.1, 3).unwrap().with_rank_bound(2);
    let rep = estimate_purified_states(&a, &a, &cfg).unwrap();
    assert!(rep.queries_total > 0, "pipeline was short-circuited");
    assert!(rep.degree > 0);
    assert!(rep.estimate.abs() <= 0.1);
}
