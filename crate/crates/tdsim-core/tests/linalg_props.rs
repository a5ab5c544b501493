//! Property tests for the dense linear algebra layer, each checked against
//! an independent brute-force oracle.

use num_complex::Complex64;
use rand::Rng;
use tdsim_core::fixtures::gen_low_rank;
use tdsim_core::linalg::{
    eigh, partial_trace, rank_delta, svd, trace_distance_exact, w_small_eigen, DensityOperator,
    Operator,
};
use tdsim_core::rng::RngStream;

fn random_operator(dim: usize, stream: &RngStream) -> Operator {
    let mut rng = stream.rng();
    Operator::from_fn(dim, |_, _| {
        Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    })
}

fn random_hermitian(dim: usize, stream: &RngStream) -> Operator {
    let g = random_operator(dim, stream);
    g.add(&g.adjoint()).unwrap().scale_re(0.5)
}

#[test]
fn tensor_matches_elementwise_kronecker_oracle() {
    let s = RngStream::root(100).child("kron");
    let a = random_operator(2, &s.child("a"));
    let b = random_operator(2, &s.child("b"));
    let t = a.tensor(&b).unwrap();
    // direct double-loop definition
    for i in 0..4 {
        for j in 0..4 {
            let expect = a.at(i / 2, j / 2) * b.at(i % 2, j % 2);
            assert!((t.at(i, j) - expect).norm() < 1e-15);
        }
    }
}

#[test]
fn tensor_mixed_product_identity() {
    let s = RngStream::root(101).child("mixed");
    let a = random_operator(2, &s.child("a"));
    let b = random_operator(2, &s.child("b"));
    let c = random_operator(2, &s.child("c"));
    let d = random_operator(2, &s.child("d"));
    // (A (x) B)(C (x) D) = AC (x) BD
    let lhs = a.tensor(&b).unwrap().mul(&c.tensor(&d).unwrap()).unwrap();
    let rhs = a.mul(&c).unwrap().tensor(&b.mul(&d).unwrap()).unwrap();
    assert!(lhs.max_abs_diff(&rhs) < 1e-12);
}

#[test]
fn partial_trace_of_product_state_factorizes() {
    let s = RngStream::root(102).child("pt");
    let rho = gen_low_rank(1, 2, &s.child("rho")).unwrap().state;
    let sigma = gen_low_rank(1, 2, &s.child("sigma")).unwrap().state;
    let joint = rho.op().tensor(sigma.op()).unwrap();
    let reduced = partial_trace(&joint, &[0]).unwrap();
    // tr_B(rho (x) sigma) = rho * tr(sigma) = rho
    assert!(reduced.max_abs_diff(rho.op()) < 1e-12);
}

#[test]
fn partial_trace_of_bell_projector_is_maximally_mixed() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let bell = [
        Complex64::new(s, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(s, 0.0),
    ];
    let proj = Operator::outer(&bell, &bell).unwrap();
    let reduced = partial_trace(&proj, &[1]).unwrap();
    assert!(reduced.max_abs_diff(&Operator::identity(2).scale_re(0.5)) < 1e-15);
}

#[test]
fn partial_trace_matches_index_sum_oracle() {
    let s = RngStream::root(103).child("sum");
    let a = random_operator(8, &s);
    let reduced = partial_trace(&a, &[0]).unwrap();
    // oracle: qubit 0 is the most significant bit of a 3-qubit index;
    // keeping it sums over the lower two bits.
    for i in 0..2usize {
        for j in 0..2usize {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in 0..4usize {
                acc += a.at(i * 4 + t, j * 4 + t);
            }
            assert!((reduced.at(i, j) - acc).norm() < 1e-14);
        }
    }
}

#[test]
fn partial_trace_after_tensor_recovers_kept_factor() {
    let s = RngStream::root(104).child("roundtrip");
    for seed in 0..10 {
        let a = random_operator(4, &s.child_indexed("a", seed));
        let b = random_operator(2, &s.child_indexed("b", seed));
        let joint = a.tensor(&b).unwrap();
        let kept = partial_trace(&joint, &[0, 1]).unwrap();
        let expect = a.scale(b.trace());
        assert!(kept.max_abs_diff(&expect) < 1e-12);
    }
}

#[test]
fn trace_distance_metric_properties() {
    let s = RngStream::root(105).child("metric");
    for seed in 0..25 {
        let a = gen_low_rank(2, 2, &s.child_indexed("a", seed)).unwrap().state;
        let b = gen_low_rank(2, 3, &s.child_indexed("b", seed)).unwrap().state;
        let c = gen_low_rank(2, 1, &s.child_indexed("c", seed)).unwrap().state;
        let ab = trace_distance_exact(&a, &b).unwrap();
        let ba = trace_distance_exact(&b, &a).unwrap();
        let ac = trace_distance_exact(&a, &c).unwrap();
        let cb = trace_distance_exact(&c, &b).unwrap();
        assert!((ab - ba).abs() < 1e-12, "symmetry");
        assert!((0.0..=1.0).contains(&ab), "range");
        assert!(ab <= ac + cb + 1e-12, "triangle inequality");
        assert!(trace_distance_exact(&a, &a).unwrap() < 1e-12, "identity");
    }
}

#[test]
fn trace_distance_zero_implies_equal_states() {
    let s = RngStream::root(106).child("zero");
    for seed in 0..10 {
        let a = gen_low_rank(2, 2, &s.child_indexed("a", seed)).unwrap().state;
        let b = gen_low_rank(2, 2, &s.child_indexed("b", seed)).unwrap().state;
        let d = trace_distance_exact(&a, &b).unwrap();
        if d < 1e-9 {
            assert!(a.op().max_abs_diff(b.op()) < 1e-8);
        } else {
            assert!(a.op().max_abs_diff(b.op()) > 1e-12);
        }
    }
}

#[test]
fn small_eigenvalue_mass_bounded_by_rank_times_threshold() {
    // 200 seeded Hermitian operators across a threshold grid
    let s = RngStream::root(107).child("mass");
    for seed in 0..200 {
        let dim = 1 << (1 + seed % 3);
        let a = random_hermitian(dim, &s.child_indexed("h", seed));
        let rank = rank_delta(&a, 0.0).unwrap();
        for &delta in &[0.0, 0.01, 0.1, 0.3, 1.0] {
            let w = w_small_eigen(&a, delta).unwrap();
            assert!(
                w <= delta * rank as f64 + 1e-12,
                "w({delta}) = {w} exceeds delta * rank = {}",
                delta * rank as f64
            );
        }
    }
}

#[test]
fn mass_monotone_and_rank_antitone_in_threshold() {
    let s = RngStream::root(108).child("mono");
    let a = random_hermitian(8, &s);
    let grid: Vec<f64> = (0..30).map(|i| i as f64 * 0.05).collect();
    let mut prev_w = -1.0;
    let mut prev_r = usize::MAX;
    for &d in &grid {
        let w = w_small_eigen(&a, d).unwrap();
        let r = rank_delta(&a, d).unwrap();
        assert!(w >= prev_w - 1e-15);
        assert!(r <= prev_r);
        prev_w = w;
        prev_r = r;
    }
}

#[test]
fn decomposition_residuals_up_to_dim_64() {
    let s = RngStream::root(109).child("recon");
    for (i, dim) in [4usize, 16, 64].into_iter().enumerate() {
        let h = random_hermitian(dim, &s.child_indexed("h", i));
        let dec = eigh(&h).unwrap();
        assert!(dec.residual(&h) < 1e-10, "eigh residual at dim {dim}");

        let g = random_operator(dim, &s.child_indexed("g", i));
        let (w, sig, v) = svd(&g);
        let recon = w
            .mul(&Operator::from_diag_real(&sig))
            .unwrap()
            .mul(&v.adjoint())
            .unwrap();
        assert!(
            recon.sub(&g).unwrap().op_norm() < 1e-10,
            "svd residual at dim {dim}"
        );
    }
}

#[test]
fn density_operator_json_round_trip_validates() {
    let s = RngStream::root(110).child("json");
    let rho = gen_low_rank(2, 2, &s).unwrap().state;
    let text = serde_json::to_string(&rho).unwrap();
    let back: DensityOperator = serde_json::from_str(&text).unwrap();
    assert!(back.op().max_abs_diff(rho.op()) < 1e-12);
    // corrupting the payload to a non-PSD matrix must fail validation
    let bad = text.replace("\"normalized\":true", "\"normalized\":false");
    let mut val: serde_json::Value = serde_json::from_str(&bad).unwrap();
    val["op"]["entries"][0] = serde_json::json!([5.0, 0.0]);
    assert!(serde_json::from_value::<DensityOperator>(val).is_err());
}
