//! Seeded generators for the state families the estimators are exercised
//! on, each paired with its approximate-low-rank profile.
//!
//! Identical specs produce bitwise-identical states: all randomness flows
//! through named streams derived from the spec seed.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Dirichlet, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::algorithms::ApproxLowRankProfile;
use crate::error::{Error, Result};
use crate::linalg::{eigh, DensityOperator, Operator};
use crate::rng::RngStream;

/// A generated state together with the profile that bounds its spectrum.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneratedState {
    pub state: DensityOperator,
    pub profile: ApproxLowRankProfile,
}

/// Family selector and parameters for [`gen_from_spec`].
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum FamilySpec {
    LowRank { r: usize },
    Depolarized { r: usize, lambda: f64 },
    Gibbs { k: usize, gap: f64 },
    PowerLaw { c: f64 },
    Pure,
}

/// Deterministic recipe for one state.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FixtureSpec {
    #[serde(flatten)]
    pub family: FamilySpec,
    pub n: usize,
    pub seed: u64,
}

/// Haar-random unitary via QR of a complex Gaussian matrix with the
/// column phases fixed by the sign of the R diagonal.
pub fn haar_unitary(dim: usize, stream: &RngStream) -> Operator {
    let mut rng = stream.rng();
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re, im)
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..dim {
            q[(i, j)] *= phase.conj();
        }
    }
    Operator::from_matrix(q).expect("square unitary")
}

/// Rank-`r` state: Haar eigenbasis, symmetric-Dirichlet eigenvalues.
pub fn gen_low_rank(n: usize, r: usize, stream: &RngStream) -> Result<GeneratedState> {
    let dim = 1usize << n;
    if r == 0 || r > dim {
        return Err(Error::Argument(format!(
            "rank {r} out of range for {dim}-dimensional states"
        )));
    }
    let weights: Vec<f64> = if r == 1 {
        vec![1.0]
    } else {
        Dirichlet::new(&vec![1.0; r])
            .map_err(|e| Error::Argument(format!("dirichlet: {e}")))?
            .sample(&mut stream.child("weights").rng())
    };
    let basis = haar_unitary(dim, &stream.child("basis"));
    let mut diag = vec![0.0; dim];
    diag[..r].copy_from_slice(&weights);
    let op = basis
        .mul(&Operator::from_diag_real(&diag))?
        .mul(&basis.adjoint())?;
    Ok(GeneratedState {
        state: DensityOperator::new(op, true)?,
        profile: ApproxLowRankProfile::ExactLowRank { r },
    })
}

/// Haar-random pure state.
pub fn gen_pure(n: usize, stream: &RngStream) -> Result<GeneratedState> {
    let dim = 1usize << n;
    let u = haar_unitary(dim, stream);
    let psi: Vec<Complex64> = (0..dim).map(|i| u.at(i, 0)).collect();
    Ok(GeneratedState {
        state: DensityOperator::from_pure(&psi)?,
        profile: ApproxLowRankProfile::ExactLowRank { r: 1 },
    })
}

/// Depolarize a state: `(1 - lambda) rho + lambda I / N`, profiled by the
/// rank of the input.
pub fn gen_depolarized(rho: &DensityOperator, lambda: f64) -> Result<GeneratedState> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Argument(format!("lambda = {lambda} outside [0, 1]")));
    }
    let dim = rho.dim();
    let mixed = rho
        .op()
        .scale_re(1.0 - lambda)
        .add(&Operator::identity(dim).scale_re(lambda / dim as f64))?;
    Ok(GeneratedState {
        state: DensityOperator::new(mixed, true)?,
        profile: ApproxLowRankProfile::Depolarized {
            r: rho.rank(),
            lambda,
            dim,
        },
    })
}

/// Gibbs state `exp(-H) / tr(exp(-H))` of a Hamiltonian with a declared
/// gap between its `k`-th and `(k+1)`-th smallest eigenvalues.
pub fn gen_gibbs(h: &Operator, k: usize, declared_gap: f64) -> Result<GeneratedState> {
    let dim = h.dim();
    if k == 0 || k >= dim {
        return Err(Error::Argument(format!("cut k = {k} out of range")));
    }
    if declared_gap < 0.0 {
        return Err(Error::Argument("gap must be non-negative".into()));
    }
    let dec = eigh(h)?;
    let mut ascending = dec.eigenvalues.clone();
    ascending.reverse();
    let measured = ascending[k] - ascending[k - 1];
    if measured + 1e-9 < declared_gap {
        return Err(Error::Validation(format!(
            "declared gap {declared_gap} exceeds spectral gap {measured}"
        )));
    }
    // shift by the ground energy before exponentiating
    let ground = ascending[0];
    let z: f64 = dec.eigenvalues.iter().map(|l| (-(l - ground)).exp()).sum();
    let rho = dec.apply(|l| (-(l - ground)).exp() / z);
    Ok(GeneratedState {
        state: DensityOperator::new(rho, true)?,
        profile: ApproxLowRankProfile::Gibbs {
            k,
            gap: declared_gap,
            dim,
        },
    })
}

/// Random gapped Hamiltonian (Haar basis, uniform level blocks separated by
/// the gap) and its Gibbs state.
pub fn gen_gibbs_random(n: usize, k: usize, gap: f64, stream: &RngStream) -> Result<GeneratedState> {
    let dim = 1usize << n;
    if k == 0 || k >= dim {
        return Err(Error::Argument(format!("cut k = {k} out of range")));
    }
    let mut rng = stream.child("levels").rng();
    let mut low: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() * 0.5).collect();
    low.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let top = low.last().copied().unwrap_or(0.0) + gap;
    let mut high: Vec<f64> = (0..dim - k).map(|_| top + rng.gen::<f64>()).collect();
    high.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut levels = low;
    levels.extend(high);
    let basis = haar_unitary(dim, &stream.child("basis"));
    let h = basis
        .mul(&Operator::from_diag_real(&levels))?
        .mul(&basis.adjoint())?;
    gen_gibbs(&h, k, gap)
}

/// State whose spectrum fills the `C / i^2` envelope greedily from the top
/// until the trace reaches one.
pub fn gen_power_law(n: usize, c: f64, stream: &RngStream) -> Result<GeneratedState> {
    let dim = 1usize << n;
    if c <= 0.0 {
        return Err(Error::Argument("cap constant must be positive".into()));
    }
    let mut diag = vec![0.0; dim];
    let mut remaining = 1.0;
    for (i, d) in diag.iter_mut().enumerate() {
        let cap = c / ((i + 1) * (i + 1)) as f64;
        *d = cap.min(remaining);
        remaining -= *d;
        if remaining <= 0.0 {
            break;
        }
    }
    if remaining > 1e-12 {
        return Err(Error::Validation(format!(
            "cap constant {c} cannot reach trace one on {dim} levels (short by {remaining:.3e})"
        )));
    }
    let basis = haar_unitary(dim, &stream.child("basis"));
    let op = basis
        .mul(&Operator::from_diag_real(&diag))?
        .mul(&basis.adjoint())?;
    Ok(GeneratedState {
        state: DensityOperator::new(op, true)?,
        profile: ApproxLowRankProfile::PowerLaw { c, dim },
    })
}

/// Generate the state a spec describes.
pub fn gen_from_spec(spec: &FixtureSpec) -> Result<GeneratedState> {
    let stream = RngStream::root(spec.seed).child("fixtures");
    match &spec.family {
        FamilySpec::LowRank { r } => gen_low_rank(spec.n, *r, &stream.child("low-rank")),
        FamilySpec::Depolarized { r, lambda } => {
            let base = gen_low_rank(spec.n, *r, &stream.child("depolarized"))?;
            gen_depolarized(&base.state, *lambda)
        }
        FamilySpec::Gibbs { k, gap } => gen_gibbs_random(spec.n, *k, *gap, &stream.child("gibbs")),
        FamilySpec::PowerLaw { c } => gen_power_law(spec.n, *c, &stream.child("power-law")),
        FamilySpec::Pure => gen_pure(spec.n, &stream.child("pure")),
    }
}

/// Deterministic JSON for a generated state (used by the CLI `gen`
/// subcommand and the fixture files consumed by `estimate`).
pub fn to_json_string(state: &GeneratedState) -> Result<String> {
    Ok(serde_json::to_string_pretty(state)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RANK_TOL;

    fn stream(seed: u64) -> RngStream {
        RngStream::root(seed).child("test")
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let u = haar_unitary(8, &stream(1));
        assert!(u.is_unitary(1e-10));
    }

    #[test]
    fn rank_one_state_is_pure() {
        let g = gen_low_rank(2, 1, &stream(2)).unwrap();
        assert!((g.state.purity() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn full_rank_uniform_weights_not_required() {
        // rank 2^n with Dirichlet weights is a valid state of full rank
        let g = gen_low_rank(2, 4, &stream(3)).unwrap();
        assert_eq!(g.state.rank(), 4);
    }

    #[test]
    fn seeded_rank_two_has_exactly_two_eigenvalues() {
        let g = gen_low_rank(3, 2, &stream(4)).unwrap();
        let above: usize = g
            .state
            .eigenvalues()
            .iter()
            .filter(|&&l| l > RANK_TOL)
            .count();
        assert_eq!(above, 2);
    }

    #[test]
    fn gen_low_rank_range_check() {
        assert!(gen_low_rank(1, 3, &stream(5)).is_err());
        assert!(gen_low_rank(1, 0, &stream(5)).is_err());
    }

    #[test]
    fn depolarized_extremes() {
        let base = gen_low_rank(2, 2, &stream(6)).unwrap().state;
        let same = gen_depolarized(&base, 0.0).unwrap();
        assert!(same.state.op().max_abs_diff(base.op()) < 1e-15);
        let mixed = gen_depolarized(&base, 1.0).unwrap();
        assert!(mixed
            .state
            .op()
            .max_abs_diff(DensityOperator::maximally_mixed(2).op())
            < 1e-15);
    }

    #[test]
    fn gibbs_of_zero_hamiltonian_is_maximally_mixed() {
        let g = gen_gibbs(&Operator::zeros(4), 1, 0.0).unwrap();
        assert!(g
            .state
            .op()
            .max_abs_diff(DensityOperator::maximally_mixed(2).op())
            < 1e-12);
    }

    #[test]
    fn gibbs_with_huge_gap_is_ground_projector() {
        let h = Operator::from_diag_real(&[0.0, 50.0]);
        let g = gen_gibbs(&h, 1, 50.0).unwrap();
        let ground = DensityOperator::basis_state(1, 0).unwrap();
        assert!(g.state.op().max_abs_diff(ground.op()) < 1e-12);
    }

    #[test]
    fn gibbs_rejects_inconsistent_gap() {
        let h = Operator::from_diag_real(&[0.0, 1.0]);
        assert!(gen_gibbs(&h, 1, 5.0).is_err());
    }

    #[test]
    fn power_law_large_cap_is_pure() {
        let g = gen_power_law(2, 2.0, &stream(7)).unwrap();
        assert!((g.state.purity() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn power_law_respects_cap() {
        let c = 0.7;
        let g = gen_power_law(4, c, &stream(8)).unwrap();
        let eigs = g.state.eigenvalues();
        for (i, l) in eigs.iter().enumerate() {
            assert!(*l <= c / ((i + 1) * (i + 1)) as f64 + 1e-12);
        }
    }

    #[test]
    fn power_law_infeasible_cap() {
        // sum of 0.3 / i^2 over 4 levels is ~0.427 < 1
        assert!(gen_power_law(2, 0.3, &stream(9)).is_err());
    }

    #[test]
    fn spec_output_is_bitwise_deterministic() {
        let spec = FixtureSpec {
            family: FamilySpec::LowRank { r: 2 },
            n: 3,
            seed: 42,
        };
        let a = to_json_string(&gen_from_spec(&spec).unwrap()).unwrap();
        let b = to_json_string(&gen_from_spec(&spec).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generated_states_pass_density_invariants() {
        for (i, spec) in [
            FixtureSpec {
                family: FamilySpec::LowRank { r: 3 },
                n: 2,
                seed: 10,
            },
            FixtureSpec {
                family: FamilySpec::Depolarized { r: 2, lambda: 0.02 },
                n: 2,
                seed: 11,
            },
            FixtureSpec {
                family: FamilySpec::Gibbs { k: 2, gap: 3.0 },
                n: 2,
                seed: 12,
            },
            FixtureSpec {
                family: FamilySpec::PowerLaw { c: 0.8 },
                n: 2,
                seed: 13,
            },
            FixtureSpec {
                family: FamilySpec::Pure,
                n: 2,
                seed: 14,
            },
        ]
        .iter()
        .enumerate()
        {
            let g = gen_from_spec(spec).unwrap_or_else(|e| panic!("spec {i}: {e}"));
            assert!(g.state.normalized(), "spec {i}");
        }
    }
}
