//! Bound checks, couplings and samplers on small instances.

mod common;

use common::*;
use num_rational::BigRational;

use poisson_md::bounds::{
    bennett_hoeffding_check, coloring_check, lemma44_45_check, lemma46_check, ratio_experiment,
    thm23_rhs, RatioModel, TestFunction,
};
use poisson_md::models::{
    matching_law, pbt_law, MatchingModel, PoissonBinomialModel, TwoRunsModel,
};
use poisson_md::poisson::{poisson_tail_rational, verify_lemma42, PoissonLaw};
use poisson_md::rational::to_f64 as rat_f64;
use poisson_md::size_bias::{
    matching_coupling_enumerate, matching_coupling_sample, pbt_coupling_delta_law,
    tv_distance_poisson, verify_tv_bound, RngStream,
};
use poisson_md::stein::{stein_solution, verify_diff_bounds, verify_g1_bound};

#[test]
fn shape_reduction_for_the_applications() {
    let n = 50.0;
    for k in 1..8u64 {
        let s = thm23_rhs(2.0 / n, 1.0 / n, 1.0, k).unwrap();
        let want = 3.0 / n * (1.0 + ((k - 1) * (k - 1)) as f64);
        assert!((s - want).abs() < 1e-14);
    }
    let model = PoissonBinomialModel::iid(400, q(1, 20)).unwrap();
    let (lambda, pt) = (model.lambda_f64(), model.p_tilde_f64());
    let rm = RatioModel::Pbt(model);
    for k in 20..40u64 {
        let xi = (k as f64 - lambda) / lambda.sqrt();
        let s = thm23_rhs(0.0, pt / lambda, lambda, k).unwrap();
        assert!((s - rm.shape(k, xi)).abs() < 1e-12 * s);
    }
}

#[test]
fn pbt_ratio_constant_is_stable_in_n() {
    let fitted: Vec<f64> = [400usize, 800, 1600]
        .iter()
        .map(|&n| {
            let m = RatioModel::Pbt(PoissonBinomialModel::iid(n, q(1, 20)).unwrap());
            let lambda = n as u64 / 20;
            ratio_experiment(&m, lambda..=lambda + 40, 0.5)
                .unwrap()
                .fitted_c
                .unwrap()
        })
        .collect();
    let (lo, hi) = fitted
        .iter()
        .fold((f64::MAX, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
    assert!(hi.is_finite() && hi / lo < 2.0, "{fitted:?}");
}

#[test]
fn ratio_vanishes_as_p_tilde_shrinks() {
    // λ = 5 fixed, p = 5/n → 0: the ratio at k = λ tends to 1
    let lhs: Vec<f64> = [50usize, 500, 5000]
        .iter()
        .map(|&n| {
            let m = RatioModel::Pbt(PoissonBinomialModel::iid(n, q(5, n as i64)).unwrap());
            ratio_experiment(&m, 5..=5, 0.5).unwrap().rows[0].lhs
        })
        .collect();
    assert!(
        lhs[0] > lhs[1] && lhs[1] > lhs[2] && lhs[2] < 1e-3,
        "{lhs:?}"
    );
}

#[test]
fn ratio_excludes_unattainable_k() {
    let m = RatioModel::Matching(MatchingModel::new(6).unwrap());
    let r = ratio_experiment(&m, 1..=8, 0.25).unwrap();
    let excluded: Vec<f64> = r
        .rows
        .iter()
        .filter(|row| row.excluded.is_some())
        .map(|row| row.params.get("k").unwrap())
        .collect();
    assert_eq!(excluded, vec![7.0, 8.0]);
}

#[test]
fn bennett_on_fair_coins() {
    let law = pbt_law(&PoissonBinomialModel::iid(30, q(1, 2)).unwrap());
    let set = bennett_hoeffding_check(0.5, 7.5, &law, &int(15), &[10.0, 1e-9]).unwrap();
    let full = set.get("bennett.full").unwrap();
    assert!(full.pass);
    // x = 10 < 4B²/a = 60: only the full form applies
    assert_eq!(set.get("bennett.simplified").unwrap().admissible_rows(), 0);
    // the full bound tends to one as x → 0
    assert!((full.rows[1].rhs_shape - 1.0).abs() < 1e-12);
}

#[test]
fn truncated_mean_small_cases() {
    let model = TwoRunsModel::new(40, q(1, 10)).unwrap();
    let r = lemma46_check(&model, &[5, 10, 15, 40, 41]).unwrap();
    assert!(r.bound.fitted_c.unwrap().is_finite());
    assert_eq!(r.bound.rows[3].lhs, 0.0);
    assert_eq!(r.bound.rows[4].lhs, 0.0);
    for n in [9usize, 12] {
        let c = coloring_check(&TwoRunsModel::cycle(n, q(1, 3)).unwrap()).unwrap();
        assert!(c.passed);
        assert_eq!(c.classes.len(), 3);
    }
}

#[test]
fn truncated_expectation_cases() {
    let law = matching_law(&MatchingModel::new(7).unwrap());
    let set = lemma44_45_check(&law, 1.0, 5, &TestFunction::G1).unwrap();
    for r in &set.reports {
        assert!(r.fitted_c.unwrap().is_finite(), "{}", r.id);
    }
    let set = lemma44_45_check(&law, 1.0, 0, &TestFunction::G1).unwrap();
    for id in ["lemma45.i", "lemma45.ii", "lemma45.iii"] {
        assert_eq!(set.get(id).unwrap().rows[0].lhs, 0.0);
    }
    let set = lemma44_45_check(&law, 1.0, 3, &TestFunction::Monomial(0)).unwrap();
    let r = &set.get("lemma44").unwrap().rows[0];
    assert!((r.lhs - 1.0).abs() < 1e-15 && r.ratio <= 1.0);
}

#[test]
fn poisson_tail_inequality_examples() {
    let set = verify_lemma42(&PoissonLaw::new(1.0).unwrap(), 2).unwrap();
    assert!(set.passed());
    let ii = &set.get("lemma42.ii").unwrap().rows[0];
    assert!((ii.lhs - (1.0 - (-1f64).exp())).abs() < 1e-14);
    assert!((ii.rhs_shape - 0.5).abs() < 1e-15);

    let set = verify_lemma42(&PoissonLaw::new(6.5).unwrap(), 40).unwrap();
    assert!(set.passed());
    for row in &set.get("lemma42.iii").unwrap().rows {
        let k = row.params.get("k").unwrap() as u64;
        let want = rat_f64(&poisson_tail_rational(&q(13, 2), k).unwrap());
        assert!(((row.lhs - want) / want).abs() < 1e-12, "k={k}");
    }
}

#[test]
fn g1_and_difference_bounds() {
    for (lambda, w) in [(3.0, 30), (0.5, 20), (1.0, 1)] {
        assert!(
            verify_g1_bound(lambda, w).unwrap().passed(),
            "lambda={lambda}"
        );
    }
    let tight = verify_g1_bound(1.0, 1).unwrap();
    assert!((tight.get("lemma43.bound").unwrap().rows[0].ratio - 1.0).abs() < 1e-12);
    for lambda in [0.25f64, 1.0, 5.0, 25.0] {
        let k = lambda.ceil() as u64 + 3;
        let set = verify_diff_bounds(&stein_solution(lambda, k, k + 60).unwrap()).unwrap();
        assert!(set.passed(), "lambda={lambda}");
    }
}

#[test]
fn tv_bound_cases() {
    let ten = PoissonBinomialModel::iid(10, q(1, 10)).unwrap();
    let r = verify_tv_bound(&pbt_coupling_delta_law(&ten)).unwrap();
    assert!(r.pass);
    assert!((r.rows[0].rhs_shape - (1.0 - (-1f64).exp()) * 0.1).abs() < 1e-14);

    let one = PoissonBinomialModel::new(vec![int(1)]).unwrap();
    let d = pbt_coupling_delta_law(&one);
    let tv = tv_distance_poisson(&d.w_law(), 1.0).unwrap();
    assert!((tv - (1.0 - (-1f64).exp())).abs() < 1e-15);
    assert!(verify_tv_bound(&d).unwrap().pass);

    let m = matching_coupling_enumerate(&MatchingModel::new(7).unwrap()).unwrap();
    assert!(verify_tv_bound(&m).unwrap().pass);
}

#[test]
fn sampler_tracks_enumeration() {
    let model = MatchingModel::new(6).unwrap();
    let exact = matching_coupling_enumerate(&model).unwrap();
    let stats = matching_coupling_sample(&model, &RngStream::new(42), 1_000_000).unwrap();
    let e = rat_f64(&exact.e_abs_delta());
    assert!(
        (stats.e_abs_diff - e).abs() < 3.0 * stats.e_abs_diff_se,
        "{} vs {e}",
        stats.e_abs_diff
    );
    assert!((stats.p_delta_plus - 1.0 / 6.0).abs() < 4.0 * stats.p_delta_plus_se);
    let again = matching_coupling_sample(&model, &RngStream::new(42), 1_000_000).unwrap();
    assert_eq!(stats, again);
    let other = matching_coupling_sample(&model, &RngStream::new(43), 1_000_000).unwrap();
    assert_ne!(stats.counts, other.counts);
}

#[test]
fn exact_modes_refuse_large_instances() {
    use poisson_md::Error;
    assert!(matches!(
        matching_coupling_enumerate(&MatchingModel::new(10).unwrap()),
        Err(Error::SizeLimit { .. })
    ));
    let big = TwoRunsModel::new(65, BigRational::new(1.into(), 4.into())).unwrap();
    assert!(matches!(
        poisson_md::models::two_runs_joint(&big),
        Err(Error::SizeLimit { .. })
    ));
}
