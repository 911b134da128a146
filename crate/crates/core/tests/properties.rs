//! Invariants checked on random inputs.

mod common;

use common::*;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

use poisson_md::bounds::eta_k;
use poisson_md::dependence::{neighborhood_stats, two_runs_graph, DependencyGraph};
use poisson_md::models::{
    matching_law, pbt_law, two_runs_joint, two_runs_joint_trace, two_runs_law_transfer,
    MatchingModel, PoissonBinomialModel, TwoRunsModel,
};
use poisson_md::poisson::{lemma41_series, PoissonLaw};
use poisson_md::size_bias::{pbt_coupling_delta_law, size_bias_identity_check, verify_tv_bound};
use poisson_md::stein::{g1, g1_poly_coeffs, stein_solution, G1Method};

fn rational_p() -> impl Strategy<Value = BigRational> {
    (1i64..40, 41i64..60).prop_map(|(a, b)| q(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tail_differences_are_masses(lambda in 0.05f64..60.0, k in 0u64..120) {
        let law = PoissonLaw::new(lambda).unwrap();
        let diff = law.tail(k).prob() - law.tail(k + 1).prob();
        let pmf = law.pmf(k).prob();
        // relative where the mass is representable, absolute noise otherwise
        prop_assert!((diff - pmf).abs() <= 1e-12 * pmf.max(law.tail(k).prob()));
    }

    #[test]
    fn tail_series_increases_in_lambda(w in 1u64..150, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let l1 = (lo * w as f64).max(1e-3);
        let l2 = (hi * w as f64).max(1e-3);
        let s1 = lemma41_series(&PoissonLaw::new(l1).unwrap(), w).unwrap();
        let s2 = lemma41_series(&PoissonLaw::new(l2).unwrap(), w).unwrap();
        prop_assert!(s1 <= s2 * (1.0 + 1e-14));
    }

    #[test]
    fn stein_residual_and_sign(lambda in 0.1f64..30.0, extra in 0u64..20) {
        let k = lambda.ceil() as u64 + extra;
        let sol = stein_solution(lambda, k, k + 40).unwrap();
        for w in 1..k + 40 {
            prop_assert!(sol.residual(w).unwrap().abs() <= 1e-10);
            prop_assert!(sol.value(w).unwrap() < 0.0);
        }
    }

    #[test]
    fn g1_is_monotone(lambda in 0.1f64..30.0) {
        let v: Vec<f64> = (0..=40).map(|w| g1(lambda, w, G1Method::IntegralSeries).unwrap().value).collect();
        prop_assert_eq!(v[0], 0.0);
        prop_assert!(v.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn pbt_law_is_exactly_normalized(p in proptest::collection::vec(rational_p(), 1..25)) {
        let model = PoissonBinomialModel::new(p.clone()).unwrap();
        let law = pbt_law(&model);
        prop_assert!(law.is_exactly_normalized());
        prop_assert_eq!(law.mean(), p.iter().sum::<BigRational>());
    }

    #[test]
    fn pbt_coupling_is_size_biased(p in proptest::collection::vec(rational_p(), 1..10)) {
        let d = pbt_coupling_delta_law(&PoissonBinomialModel::new(p).unwrap());
        prop_assert!(size_bias_identity_check(&d.w_law(), &d.ws_law(), 6).passed);
        prop_assert!(d.prob_delta(-1).is_zero());
        prop_assert!(verify_tv_bound(&d).unwrap().pass);
    }

    #[test]
    fn two_runs_routes_agree(n in 3usize..30, a in 1i64..9) {
        let p = q(a, 10);
        let model = TwoRunsModel::cycle(n, p.clone()).unwrap();
        let sweep = two_runs_joint(&model).unwrap();
        let trace = two_runs_joint_trace(&model).unwrap();
        let law = two_runs_law_transfer(&model);
        for w in 0..=n {
            let mut marginal = BigRational::zero();
            for t in 0..=n {
                let m = sweep.mass(w, t).unwrap();
                prop_assert_eq!(&m, &trace.mass(w, t).unwrap());
                if t > w {
                    prop_assert!(m.is_zero());
                }
                marginal += m;
            }
            prop_assert_eq!(marginal, law.mass(w as u64));
        }
        prop_assert_eq!(law.mean(), int(n as u64) * &p * &p);
    }

    #[test]
    fn matching_mean_is_one(n in 1usize..60) {
        prop_assert!(matching_law(&MatchingModel::new(n).unwrap()).mean().is_one());
    }

    #[test]
    fn m_is_relabeling_invariant(n in 5usize..30, seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let g = two_runs_graph(n).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let h = g.relabel(&perm).unwrap();
        prop_assert_eq!(neighborhood_stats(&g).m, 3);
        prop_assert_eq!(neighborhood_stats(&h).m, 3);
    }

    #[test]
    fn random_graph_stats(sizes in proptest::collection::vec(proptest::collection::vec(0usize..8, 0..5), 1..8)) {
        let n = sizes.len();
        let hoods: Vec<Vec<usize>> = sizes
            .iter()
            .enumerate()
            .map(|(i, extra)| {
                let mut b: Vec<usize> = extra.iter().map(|j| j % n).collect();
                b.push(i);
                b.sort_unstable();
                b.dedup();
                b
            })
            .collect();
        let g = DependencyGraph::new(hoods.clone()).unwrap();
        let s = neighborhood_stats(&g);
        let m_out = hoods.iter().map(Vec::len).max().unwrap();
        let m_in = (0..n).map(|j| hoods.iter().filter(|b| b.contains(&j)).count()).max().unwrap();
        prop_assert_eq!((s.m_out, s.m_in, s.m), (m_out, m_in, m_out.max(m_in)));
    }

    #[test]
    fn eta_nondecreasing(n in 5usize..40, a in 1i64..20) {
        let model = PoissonBinomialModel::iid(n, q(a, 40)).unwrap();
        let law = pbt_law(&model);
        let lambda = model.lambda_f64();
        let k0 = lambda.ceil() as u64;
        let mut last = 0.0;
        for k in k0..=n as u64 {
            let e = eta_k(&law, lambda, k).unwrap().value;
            prop_assert!(e >= last && e >= 0.0);
            last = e;
        }
    }
}

#[test]
fn g1_coefficients_are_exact() {
    for w in 1..30u64 {
        let c = g1_poly_coeffs(w);
        assert_eq!(c.len() as u64, w);
        for (j, cj) in c.iter().enumerate() {
            let want = choose(w - 1, j as u64) * fact(j as u64 + 1);
            assert_eq!(BigInt::from(cj.clone()), want);
        }
    }
}
