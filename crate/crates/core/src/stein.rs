//! Solution of the Poisson Stein equation
//!
//! ```text
//! λ f(w+1) − w f(w) = h(w) − E h(Y),    h = 1{w ≥ k},  k ≥ λ,
//! ```
//!
//! in closed form, its forward differences, and the auxiliary function
//!
//! ```text
//! g₁(w) = e^λ w!/λ^{w+1} P(Y ≤ w) − e^λ (w−1)!/λ^w P(Y ≤ w−1),   g₁(0) = 0,
//! ```
//!
//! evaluated three independent ways. Values are stored as sign plus log
//! magnitude because (w−1)!/λ^w leaves the f64 range near w ≈ 170.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{invalid, Error, Result};
use crate::logspace::{log_add_exp, log_sum_exp, SignedLog};
use crate::poisson::{lemma41_sum, PoissonLaw, FLOAT_TOL};
use crate::rational::{self, binomial, factorial};
use crate::report::{BoundReport, Direction, GridRow, Params, ReportSet};

/// Digits of agreement beyond which f(w+1) − f(w) switches to the series form.
const CANCELLATION_DIGITS: f64 = 8.0;
/// Largest w for which method (b) runs in exact rationals.
const EXACT_SERIES_MAX_W: u64 = 400;

/// Tabulated f_h for h = 1{w ≥ k}, on 0..=w_max. Immutable once built.
#[derive(Debug, Clone, Serialize)]
pub struct SteinSolution {
    lambda: f64,
    k: u64,
    values: Vec<SignedLog>,
    ln_tail_k: f64,
    ln_cdf_k_minus_1: f64,
}

/// Default table length: k + ⌈10√λ⌉ + 50.
pub fn default_w_max(lambda: f64, k: u64) -> u64 {
    k + (10.0 * lambda.sqrt()).ceil() as u64 + 50
}

pub fn stein_solution(lambda: f64, k: u64, w_max: u64) -> Result<SteinSolution> {
    let law = PoissonLaw::new(lambda)?;
    if (k as f64) < lambda {
        return Err(Error::RightTailOnly {
            k: k as i64,
            lambda,
        });
    }
    if w_max < k + 2 {
        return Err(invalid(
            "w_max",
            format!("must be >= k + 2 = {}, got {w_max}", k + 2),
        ));
    }
    let ln_lambda = lambda.ln();
    let ln_tail_k = law.ln_tail(k);
    // k ≥ λ > 0 so k ≥ 1
    let ln_cdf_k_minus_1 = law.ln_cdf(k - 1);

    let mut values = Vec::with_capacity(w_max as usize + 1);
    values.push(SignedLog::ZERO);
    for w in 1..=w_max {
        let prefactor = lambda + ln_factorial(w - 1) - w as f64 * ln_lambda;
        let ln_abs = if w >= k {
            prefactor + ln_cdf_k_minus_1 + law.ln_tail(w)
        } else {
            prefactor + ln_tail_k + law.ln_cdf(w - 1)
        };
        values.push(SignedLog::new(true, ln_abs));
    }
    // f_h(0) does not enter the equation; pinned to f_h(1)
    values[0] = values[1];
    Ok(SteinSolution {
        lambda,
        k,
        values,
        ln_tail_k,
        ln_cdf_k_minus_1,
    })
}

impl SteinSolution {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn w_max(&self) -> u64 {
        self.values.len() as u64 - 1
    }

    /// ln P(Y ≥ k), i.e. ln E h(Y).
    pub fn ln_tail_k(&self) -> f64 {
        self.ln_tail_k
    }

    pub fn signed(&self, w: u64) -> Result<SignedLog> {
        self.values
            .get(w as usize)
            .copied()
            .ok_or(Error::OutOfRange {
                index: w as i64,
                lo: 0,
                hi: self.w_max() as i64,
            })
    }

    pub fn value(&self, w: u64) -> Result<f64> {
        Ok(self.signed(w)?.to_f64())
    }

    /// λ f(w+1) − w f(w) − (1{w ≥ k} − P(Y ≥ k)) for 1 ≤ w < w_max.
    pub fn residual(&self, w: u64) -> Result<f64> {
        self.check_diff_range(w)?;
        let lhs = self.lambda * self.value(w + 1)? - w as f64 * self.value(w)?;
        let h = if w >= self.k { 1.0 } else { 0.0 };
        Ok(lhs - (h - self.ln_tail_k.exp()))
    }

    fn check_diff_range(&self, w: u64) -> Result<()> {
        if w < 1 || w >= self.w_max() {
            return Err(Error::OutOfRange {
                index: w as i64,
                lo: 1,
                hi: self.w_max() as i64 - 1,
            });
        }
        Ok(())
    }

    /// f(w+1) − f(w) from the series representation, never by subtraction.
    ///
    /// For w ≥ k it is P(Y ≤ k−1) Σ_j λ^j (w−1)!(j+1)/(j+w+1)!, and for
    /// w < k it is −P(Y ≥ k) g₁(w).
    pub fn forward_diff_series(&self, w: u64) -> Result<SignedLog> {
        self.check_diff_range(w)?;
        Ok(if w >= self.k {
            let s = lemma41_sum(self.lambda, w) / w as f64;
            SignedLog::new(false, self.ln_cdf_k_minus_1 + s.ln())
        } else {
            SignedLog::new(true, self.ln_tail_k + ln_g1_series(self.lambda, w))
        })
    }

    fn forward_diff_signed(&self, w: u64) -> Result<SignedLog> {
        self.check_diff_range(w)?;
        let next = self.values[w as usize + 1];
        let cur = self.values[w as usize];
        if next.agreeing_digits(cur) > CANCELLATION_DIGITS {
            return self.forward_diff_series(w);
        }
        Ok(next.sub(cur))
    }
}

/// f_h(w+1) − f_h(w) for 1 ≤ w < w_max.
pub fn forward_diff(sol: &SteinSolution, w: u64) -> Result<f64> {
    Ok(sol.forward_diff_signed(w)?.to_f64())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum G1Method {
    /// e^λ w!/λ^{w+1} P(Y ≤ w) − e^λ (w−1)!/λ^w P(Y ≤ w−1).
    Factorial,
    /// ∫₀^∞ x(1+x)^{w−1} e^{−λx} dx = Σ_j C(w−1,j)(j+1)!/λ^{j+2}.
    IntegralSeries,
    /// (f_h(w) − f_h(w+1))/P(Y ≥ k) for a k > w.
    SteinDiff,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct G1Value {
    pub lambda: f64,
    pub w: u64,
    pub value: f64,
}

pub fn g1(lambda: f64, w: u64, method: G1Method) -> Result<G1Value> {
    let law = PoissonLaw::new(lambda)?;
    let value = if w == 0 {
        0.0
    } else {
        match method {
            G1Method::Factorial => g1_factorial(&law, w).to_f64(),
            G1Method::IntegralSeries if w <= EXACT_SERIES_MAX_W => {
                rational::to_f64(&g1_series_exact(&rational::from_f64(lambda), w))
            }
            G1Method::IntegralSeries => ln_g1_series(lambda, w).exp(),
            G1Method::SteinDiff => {
                let k = (w + 1).max(lambda.ceil() as u64);
                let sol = stein_solution(lambda, k, k + 2)?;
                let d = sol.signed(w)?.sub(sol.signed(w + 1)?);
                let v = (d.ln_abs - sol.ln_tail_k()).exp();
                if d.negative {
                    -v
                } else {
                    v
                }
            }
        }
    };
    Ok(G1Value { lambda, w, value })
}

fn g1_factorial(law: &PoissonLaw, w: u64) -> SignedLog {
    let l = law.lambda();
    let ln_l = l.ln();
    let a = l + ln_factorial(w) - (w + 1) as f64 * ln_l + law.ln_cdf(w);
    let b = l + ln_factorial(w - 1) - w as f64 * ln_l + law.ln_cdf(w - 1);
    SignedLog::new(false, a).sub(SignedLog::new(false, b))
}

/// Coefficients of g₁(w) as a polynomial in 1/λ: entry j multiplies
/// λ^{−(j+2)} and equals C(w−1, j)(j+1)!.
pub fn g1_poly_coeffs(w: u64) -> Vec<BigUint> {
    if w == 0 {
        return Vec::new();
    }
    (0..w)
        .map(|j| binomial(w - 1, j) * factorial(j + 1))
        .collect()
}

/// Method (b) in exact rational arithmetic.
pub fn g1_series_exact(lambda: &BigRational, w: u64) -> BigRational {
    let inv = lambda.recip();
    let mut power = &inv * &inv;
    let mut acc = BigRational::zero();
    for c in g1_poly_coeffs(w) {
        acc += BigRational::from_integer(c.into()) * &power;
        power *= &inv;
    }
    acc
}

/// ln g₁(w) from method (b) with log-space summation, for any w ≥ 1.
pub fn ln_g1_series(lambda: f64, w: u64) -> f64 {
    let ln_l = lambda.ln();
    let terms: Vec<f64> = (0..w)
        .map(|j| {
            ln_factorial(w - 1) - ln_factorial(j) - ln_factorial(w - 1 - j) + ln_factorial(j + 1)
                - (j + 2) as f64 * ln_l
        })
        .collect();
    log_sum_exp(&terms)
}

/// Checks g₁(w) ≤ 1/λ + (w−1)!(w−λ)₊ e^λ/λ^{w+1} and g₁(w) ≤ g₁(w+1) for
/// 1 ≤ w ≤ w_max. g₁ comes from the exact series; monotonicity is decided
/// in exact arithmetic.
pub fn verify_g1_bound(lambda: f64, w_max: u64) -> Result<ReportSet> {
    PoissonLaw::new(lambda)?;
    if w_max < 1 {
        return Err(invalid("w_max", "must be >= 1"));
    }
    let exact_lambda = rational::from_f64(lambda);
    let g: Vec<BigRational> = (0..=w_max + 1)
        .map(|w| g1_series_exact(&exact_lambda, w))
        .collect();

    let ln_l = lambda.ln();
    let mut bound = BoundReport::new("lemma43.bound", Direction::Upper);
    let mut mono = BoundReport::new("lemma43.monotone", Direction::Upper);
    for w in 1..=w_max {
        let gw = &g[w as usize];
        let excess = w as f64 - lambda;
        let ln_rhs = if excess > 0.0 {
            log_add_exp(
                -ln_l,
                ln_factorial(w - 1) + excess.ln() + lambda - (w + 1) as f64 * ln_l,
            )
        } else {
            -ln_l
        };
        let params = Params::new().with("lambda", lambda).with("w", w as f64);
        bound.push(GridRow::from_logs(
            params.clone(),
            rational::ln_rational(gw),
            ln_rhs,
        ));

        let next = &g[w as usize + 1];
        let mut row = GridRow::new(params, rational::to_f64(gw), rational::to_f64(next));
        row.ratio = rational::to_f64(&(gw / next));
        if gw > next {
            row.ratio = row.ratio.max(1.0 + 2.0 * f64::EPSILON);
        }
        mono.push(row);
    }
    let mut set = ReportSet::new(
        "lemma43",
        Params::new()
            .with("lambda", lambda)
            .with("w_max", w_max as f64),
    );
    set.reports = vec![bound.finish(1.0, FLOAT_TOL), mono.finish(1.0, 0.0)];
    Ok(set)
}

/// Checks |f_h(w+1) − f_h(w)| ≤ (1 − e^{−λ})/λ over a table, and reports the
/// fitted C in f_h(w+1) − f_h(w) ≤ C/w on w ≥ k.
pub fn verify_diff_bounds(sol: &SteinSolution) -> Result<ReportSet> {
    let l = sol.lambda();
    let ln_bound = (-(-l).exp_m1()).ln() - l.ln();
    let mut abs = BoundReport::new("stein.diff_abs", Direction::Upper);
    let mut upper = BoundReport::new("stein.diff_over_w", Direction::Upper);
    let mut positive = BoundReport::new("stein.diff_positive", Direction::Lower);
    for w in 1..sol.w_max() {
        let d = sol.forward_diff_signed(w)?;
        let params = Params::new()
            .with("lambda", l)
            .with("k", sol.k() as f64)
            .with("w", w as f64);
        abs.push(GridRow::from_logs(params.clone(), d.ln_abs, ln_bound));
        if w >= sol.k() {
            let signed = d.to_f64();
            upper.push(GridRow::new(params.clone(), signed, 1.0 / w as f64));
            let mut row = GridRow::new(params, signed, 1.0);
            row.ratio = if d.negative || d.is_zero() { 0.0 } else { 1.0 };
            positive.push(row);
        }
    }
    let mut set = ReportSet::new(
        "stein_diff",
        Params::new().with("lambda", l).with("k", sol.k() as f64),
    );
    set.reports = vec![
        abs.finish(1.0, FLOAT_TOL),
        upper.finish(f64::INFINITY, 0.0),
        positive.finish(1.0, 0.0),
    ];
    Ok(set)
}
