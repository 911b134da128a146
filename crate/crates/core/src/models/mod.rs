//! Exact finite-support laws of W for the three applications: independent
//! indicators, 2-runs on a cycle, and fixed points of a uniform permutation.
//!
//! Masses are integers over one common denominator, so sums and tails stay
//! exact and cheap; floats appear only at the reporting boundary.

mod matching;
mod pbt;
mod two_runs;

pub use matching::{derangements, matching_law, MatchingModel};
pub(crate) use pbt::{leave_one_out as pbt_leave_one_out, weights as pbt_weights};
pub use pbt::{pbt_law, PoissonBinomialModel};
pub use two_runs::{
    delta_condition_2runs, two_runs_joint, two_runs_joint_approx, two_runs_joint_trace,
    two_runs_law, two_runs_law_transfer, DeltaConditionRow, DeltaConditionTable, JointLaw2Runs,
    TwoRunsModel, EXACT_TWO_RUNS_MAX_N,
};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::ser::{SerializeStruct, Serializer};
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::logspace::LogProb;
use crate::rational::{self, format_rational, log_ratio};
use crate::report::Params;

/// Law of a count on 0..=w_max with exact rational masses.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactLaw {
    model: String,
    params: Params,
    numerators: Vec<BigUint>,
    denominator: BigUint,
    shadow: Vec<f64>,
}

impl ExactLaw {
    /// Builds a law from integer weights over a common denominator.
    ///
    /// Trailing zero-mass points are kept; the support is 0..=len-1.
    pub fn from_numerators(
        model: impl Into<String>,
        params: Params,
        numerators: Vec<BigUint>,
        denominator: BigUint,
    ) -> Result<Self> {
        if numerators.is_empty() {
            return Err(invalid("masses", "empty support"));
        }
        let total: BigUint = numerators.iter().sum();
        if total != denominator {
            return Err(invalid("masses", "do not sum to one"));
        }
        let shadow = numerators
            .iter()
            .map(|n| log_ratio(n, &denominator).exp())
            .collect();
        Ok(ExactLaw {
            model: model.into(),
            params,
            numerators,
            denominator,
            shadow,
        })
    }

    /// Builds a law from rational masses (brought to their common denominator).
    pub fn from_rationals(
        model: impl Into<String>,
        params: Params,
        masses: &[BigRational],
    ) -> Result<Self> {
        if masses.iter().any(|m| m < &BigRational::zero()) {
            return Err(invalid("masses", "negative mass"));
        }
        let lcm = masses
            .iter()
            .fold(BigInt::one(), |acc, m| acc.lcm(m.denom()));
        let numerators = masses
            .iter()
            .map(|m| {
                (m.numer() * (&lcm / m.denom()))
                    .to_biguint()
                    .expect("non-negative")
            })
            .collect();
        Self::from_numerators(
            model,
            params,
            numerators,
            lcm.to_biguint().expect("positive"),
        )
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn w_max(&self) -> u64 {
        self.numerators.len() as u64 - 1
    }

    pub fn numerators(&self) -> &[BigUint] {
        &self.numerators
    }

    pub fn denominator(&self) -> &BigUint {
        &self.denominator
    }

    pub fn mass(&self, w: u64) -> BigRational {
        match self.numerators.get(w as usize) {
            Some(n) => ratio(n, &self.denominator),
            None => BigRational::zero(),
        }
    }

    /// Float shadow of P(W = w).
    pub fn mass_f64(&self, w: u64) -> f64 {
        self.shadow.get(w as usize).copied().unwrap_or(0.0)
    }

    pub fn masses_f64(&self) -> &[f64] {
        &self.shadow
    }

    /// E f(W) exactly, for an integer-valued f.
    pub fn expect_int(&self, f: impl Fn(u64) -> BigInt) -> BigRational {
        let num: BigInt = self
            .numerators
            .iter()
            .enumerate()
            .map(|(w, n)| f(w as u64) * BigInt::from(n.clone()))
            .sum();
        BigRational::new(num, self.denominator.clone().into())
    }

    /// E f(W) for a rational-valued f.
    pub fn expect(&self, f: impl Fn(u64) -> BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for (w, n) in self.numerators.iter().enumerate() {
            if !n.is_zero() {
                acc += f(w as u64) * BigRational::from_integer(n.clone().into());
            }
        }
        acc / BigRational::from_integer(self.denominator.clone().into())
    }

    pub fn mean(&self) -> BigRational {
        self.expect_int(BigInt::from)
    }

    pub fn mean_f64(&self) -> f64 {
        rational::to_f64(&self.mean())
    }

    /// E W^q exactly.
    pub fn moment(&self, q: u32) -> BigRational {
        self.expect_int(|w| num_traits::pow(BigInt::from(w), q as usize))
    }

    /// P(W ≥ k) exactly.
    pub fn tail_exact(&self, k: u64) -> BigRational {
        ratio(&self.tail_numerator(k), &self.denominator)
    }

    fn tail_numerator(&self, k: u64) -> BigUint {
        self.numerators.iter().skip(k as usize).sum()
    }

    /// ln P(W ≥ k) for every k in 0..=w_max+1, from exact suffix sums.
    pub fn ln_tails(&self) -> Vec<f64> {
        let mut out = vec![f64::NEG_INFINITY; self.numerators.len() + 1];
        let mut acc = BigUint::zero();
        for (k, n) in self.numerators.iter().enumerate().rev() {
            acc += n;
            out[k] = log_ratio(&acc, &self.denominator);
        }
        out
    }

    pub fn is_exactly_normalized(&self) -> bool {
        self.numerators.iter().sum::<BigUint>() == self.denominator
    }
}

fn ratio(n: &BigUint, d: &BigUint) -> BigRational {
    BigRational::new(n.clone().into(), d.clone().into())
}

/// P(W ≥ k), exact, emitted in log space.
pub fn law_tail(law: &ExactLaw, k: u64) -> LogProb {
    if k > law.w_max() {
        return LogProb::ZERO;
    }
    LogProb::new(log_ratio(&law.tail_numerator(k), &law.denominator))
}

impl Serialize for ExactLaw {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let masses: Vec<String> = (0..=self.w_max())
            .map(|w| format_rational(&self.mass(w)))
            .collect();
        let mean = self.mean();
        let mut st = s.serialize_struct("ExactLaw", 6)?;
        st.serialize_field("model", &self.model)?;
        st.serialize_field("params", &self.params)?;
        st.serialize_field("support", &[0, self.w_max()])?;
        st.serialize_field("masses", &masses)?;
        st.serialize_field("mean", &rational::to_f64(&mean))?;
        st.serialize_field("mean_exact", &format_rational(&mean))?;
        st.end()
    }
}
