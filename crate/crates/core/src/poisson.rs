//! Poisson mass and tails in log space, and the Poisson-side lemmas: the
//! uniform bound on Σ λ^j w!(j+1)/(j+w+1)! and the three tail inequalities
//! used throughout the proofs.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use statrs::function::factorial::ln_factorial;

use crate::error::{invalid, Error, Result};
use crate::logspace::{log1mexp, log_sum_exp, LogProb};
use crate::rational;
use crate::report::{BoundReport, Direction, GridRow, Params, ReportSet};

/// Relative increment at which the upward tail series stops.
const TAIL_SERIES_EPS: f64 = 1e-18;
/// Round-off allowance when comparing the two sides of an exact inequality.
pub const FLOAT_TOL: f64 = 1e-12;

/// Y ~ Poi(λ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoissonLaw {
    lambda: f64,
}

impl PoissonLaw {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(invalid(
                "lambda",
                format!("must be finite and > 0, got {lambda}"),
            ));
        }
        Ok(PoissonLaw { lambda })
    }

    #[inline]
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// ln P(Y = k).
    pub fn ln_pmf(&self, k: u64) -> f64 {
        k as f64 * self.lambda.ln() - self.lambda - ln_factorial(k)
    }

    pub fn pmf(&self, k: u64) -> LogProb {
        LogProb::new(self.ln_pmf(k))
    }

    /// ln P(Y >= k).
    pub fn ln_tail(&self, k: u64) -> f64 {
        if k == 0 {
            return 0.0;
        }
        if (k as f64) <= self.lambda {
            // complement of the lower sum; no cancellation below the mean
            let lower: Vec<f64> = (0..k).map(|j| self.ln_pmf(j)).collect();
            return log1mexp(log_sum_exp(&lower));
        }
        self.ln_pmf(k) + self.upward_factor(k).ln()
    }

    /// Σ_{i≥0} λ^i k!/(k+i)!, i.e. P(Y >= k)/P(Y = k), for k > λ.
    fn upward_factor(&self, k: u64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut i = 0u64;
        loop {
            i += 1;
            term *= self.lambda / (k + i) as f64;
            sum += term;
            if term < TAIL_SERIES_EPS * sum {
                return sum;
            }
        }
    }

    pub fn tail(&self, k: u64) -> LogProb {
        LogProb::new(self.ln_tail(k))
    }

    /// ln P(Y <= k).
    pub fn ln_cdf(&self, k: u64) -> f64 {
        if (k + 1) as f64 > self.lambda {
            log1mexp(self.ln_tail(k + 1))
        } else {
            let terms: Vec<f64> = (0..=k).map(|j| self.ln_pmf(j)).collect();
            log_sum_exp(&terms)
        }
    }

    /// Smallest w with P(Y >= w) < eps; the Poisson side of every
    /// expectation is truncated there.
    pub fn truncation_point(&self, eps: f64) -> u64 {
        let ln_eps = eps.ln();
        let mut w = self.lambda.ceil() as u64;
        while self.ln_tail(w) >= ln_eps {
            w += 1;
        }
        w
    }
}

/// P(Y ≥ k) as a rational with relative error below 2^{-1000}, for a
/// rational λ. Both e^λ and the tail are truncated at one index M chosen so
/// the dropped terms are negligible against λ^k/k!.
pub fn poisson_tail_rational(lambda: &BigRational, k: u64) -> Result<BigRational> {
    if !lambda.is_positive() {
        return Err(invalid("lambda", "must be > 0"));
    }
    let l = rational::to_f64(lambda);
    let ln_l = l.ln();
    let ln_term = |j: u64| j as f64 * ln_l - ln_factorial(j);
    let target = ln_term(k) - 1000.0 * std::f64::consts::LN_2 - 10.0;
    let mut m = k.max((2.0 * l).ceil() as u64) + 1;
    while ln_term(m) > target {
        m += 1;
    }
    let mut term = BigRational::one();
    let mut total = BigRational::zero();
    let mut tail = BigRational::zero();
    for j in 0..=m {
        if j > 0 {
            term = term * lambda / BigRational::from_integer(BigInt::from(j));
        }
        total += &term;
        if j >= k {
            tail += &term;
        }
    }
    Ok(tail / total)
}

/// Standardized deviation (k − λ)/√λ of a right-tail point.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Xi(f64);

impl Xi {
    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn poisson_pmf(law: &PoissonLaw, k: u64) -> LogProb {
    law.pmf(k)
}

pub fn poisson_tail(law: &PoissonLaw, k: u64) -> LogProb {
    law.tail(k)
}

pub fn xi_of(law: &PoissonLaw, k: i64) -> Result<Xi> {
    let lambda = law.lambda();
    if (k as f64) < lambda {
        return Err(Error::RightTailOnly { k, lambda });
    }
    Ok(Xi((k as f64 - lambda) / lambda.sqrt()))
}

/// Σ_j λ^j w!(j+1)/(j+w+1)! for any w ≥ 0, λ > 0.
///
/// Stops once a term is below 1e-18 of the running sum and terms are
/// decreasing; the ratio of consecutive terms tends to zero.
pub(crate) fn lemma41_sum(lambda: f64, w: u64) -> f64 {
    let w = w as f64;
    let mut term = 1.0 / (w + 1.0);
    let mut sum = term;
    let mut j = 0.0;
    loop {
        let next = term * lambda * (j + 2.0) / ((j + 1.0) * (j + w + 2.0));
        sum += next;
        let decreasing = next < term;
        term = next;
        j += 1.0;
        if decreasing && term < 1e-18 * sum {
            return sum;
        }
    }
}

/// The series whose uniform boundedness controls f_h(w+1) − f_h(w) for w ≥ k.
pub fn lemma41_series(law: &PoissonLaw, w: u64) -> Result<f64> {
    if (w as f64) < law.lambda() || w == 0 {
        return Err(invalid(
            "w",
            format!(
                "requires integer w >= lambda > 0, got w = {w}, lambda = {}",
                law.lambda()
            ),
        ));
    }
    Ok(lemma41_sum(law.lambda(), w))
}

/// Reports the supremum of [`lemma41_series`] over `w` in `ceil(λ)..=w_max`
/// for each λ in the grid. The constant is fitted, never assumed.
pub fn verify_lemma41(lambdas: &[f64], w_max: u64) -> Result<BoundReport> {
    let mut report = BoundReport::new("lemma41.series", Direction::Upper);
    for &lambda in lambdas {
        let law = PoissonLaw::new(lambda)?;
        let w_lo = (lambda.ceil() as u64).max(1);
        for w in w_lo..=w_max {
            let s = lemma41_series(&law, w)?;
            report.push(GridRow::new(
                Params::new().with("lambda", lambda).with("w", w as f64),
                s,
                1.0,
            ));
        }
    }
    Ok(report.finish(f64::INFINITY, 0.0))
}

/// Checks the three Poisson tail inequalities for `k` up to `k_max`:
///
/// * `lemma42.i`   P(Y ≥ k) ≥ c for k < λ (c reported as the observed minimum),
/// * `lemma42.ii`  P(Y ≥ k)/P(Y ≥ k−1) ≥ λ/(λ+k) for 1 ≤ k ≤ k_max,
/// * `lemma42.iii` P(Y ≥ k) ≤ P(Y = k)(k+1)/(k−λ+1) for k > λ−1.
pub fn verify_lemma42(law: &PoissonLaw, k_max: u64) -> Result<ReportSet> {
    if k_max < 1 {
        return Err(invalid("k_max", "must be >= 1"));
    }
    let lambda = law.lambda();
    let tails: Vec<f64> = (0..=k_max).map(|k| law.ln_tail(k)).collect();

    let mut lower = BoundReport::new("lemma42.i", Direction::Lower);
    for k in (0..=k_max).filter(|&k| (k as f64) < lambda) {
        lower.push(GridRow::from_logs(
            Params::new().with("lambda", lambda).with("k", k as f64),
            tails[k as usize],
            0.0,
        ));
    }
    let lower = lower.finish(f64::MIN_POSITIVE, 0.0);

    let mut ratio = BoundReport::new("lemma42.ii", Direction::Lower);
    for k in 1..=k_max {
        let ln_lhs = tails[k as usize] - tails[k as usize - 1];
        let ln_rhs = lambda.ln() - (lambda + k as f64).ln();
        ratio.push(GridRow::from_logs(
            Params::new().with("lambda", lambda).with("k", k as f64),
            ln_lhs,
            ln_rhs,
        ));
    }
    let ratio = ratio.finish(1.0, FLOAT_TOL);

    let mut upper = BoundReport::new("lemma42.iii", Direction::Upper);
    for k in (0..=k_max).filter(|&k| k as f64 > lambda - 1.0) {
        let kf = k as f64;
        let ln_rhs = law.ln_pmf(k) + (kf + 1.0).ln() - (kf - lambda + 1.0).ln();
        upper.push(GridRow::from_logs(
            Params::new().with("lambda", lambda).with("k", kf),
            tails[k as usize],
            ln_rhs,
        ));
    }
    let upper = upper.finish(1.0, FLOAT_TOL);

    let mut set = ReportSet::new(
        "lemma42",
        Params::new()
            .with("lambda", lambda)
            .with("k_max", k_max as f64),
    );
    set.reports = vec![lower, ratio, upper];
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law(l: f64) -> PoissonLaw {
        PoissonLaw::new(l).unwrap()
    }

    #[test]
    fn rejects_bad_lambda() {
        assert!(PoissonLaw::new(0.0).is_err());
        assert!(PoissonLaw::new(-1.0).is_err());
        assert!(PoissonLaw::new(f64::NAN).is_err());
    }

    #[test]
    fn closed_form_pmf() {
        assert!((law(2.0).ln_pmf(0) + 2.0).abs() < 1e-15);
        assert!((law(1.0).ln_pmf(1) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn closed_form_tail() {
        let want = (1.0 - 2.0 * (-1f64).exp()).ln();
        assert!((law(1.0).ln_tail(2) - want).abs() < 1e-14);
        assert_eq!(law(1.0).ln_tail(0), 0.0);
    }

    #[test]
    fn xi_values_and_domain() {
        assert_eq!(xi_of(&law(4.0), 4).unwrap().value(), 0.0);
        assert_eq!(xi_of(&law(4.0), 8).unwrap().value(), 2.0);
        assert_eq!(xi_of(&law(1.0), 5).unwrap().value(), 4.0);
        assert!(matches!(
            xi_of(&law(4.0), 3),
            Err(Error::RightTailOnly { .. })
        ));
    }

    #[test]
    fn tail_series_limits() {
        assert!((lemma41_series(&law(1.0), 1).unwrap() - 1.0).abs() < 1e-12);
        // only the j = 0 term survives as λ → 0
        assert!((lemma41_sum(1e-12, 1) - 0.5).abs() < 1e-11);
        assert!(lemma41_series(&law(3.0), 2).is_err());
    }

    #[test]
    fn tail_inequality_small_cases() {
        let set = verify_lemma42(&law(1.0), 2).unwrap();
        let ii = set.get("lemma42.ii").unwrap();
        // P(Y≥1)/P(Y≥0) = 1 − e^{-1} against 1/2
        let r = ii.rows[0].ratio;
        assert!((r - (1.0 - (-1f64).exp()) / 0.5).abs() < 1e-12);
        let iii = set.get("lemma42.iii").unwrap();
        let row = iii
            .rows
            .iter()
            .find(|r| r.params.get("k") == Some(2.0))
            .unwrap();
        assert!((row.lhs - 0.264_241_117_657_115_4).abs() < 1e-12);
        assert!((row.rhs_shape - (-1f64).exp() / 2.0 * 1.5).abs() < 1e-12);
        assert!(set.passed());
    }

    #[test]
    fn rational_tail_agrees_with_float() {
        for (l, k) in [(1.0, 0u64), (1.0, 3), (6.5, 4), (6.5, 20), (0.25, 5)] {
            let exact = poisson_tail_rational(&rational::from_f64(l), k).unwrap();
            let want = law(l).ln_tail(k);
            assert!(
                (rational::ln_rational(&exact) - want).abs() < 1e-13,
                "l={l} k={k}"
            );
        }
    }

    #[test]
    fn truncation_point_is_tight() {
        let l = law(5.0);
        let w = l.truncation_point(1e-18);
        assert!(l.ln_tail(w) < 1e-18f64.ln());
        assert!(l.ln_tail(w - 1) >= 1e-18f64.ln());
    }
}
