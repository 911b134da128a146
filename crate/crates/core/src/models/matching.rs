use num_bigint::BigUint;
use num_traits::{One, Zero};

use super::ExactLaw;
use crate::error::{invalid, Result};
use crate::rational::{binomial, factorial};
use crate::report::Params;

/// Number of fixed points of a uniform permutation of {1..n}; λ = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchingModel {
    n: usize,
}

impl MatchingModel {
    pub fn new(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(invalid("n", "needs n >= 1"));
        }
        Ok(MatchingModel { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        1.0
    }

    pub(crate) fn params(&self) -> Params {
        Params::new().with("n", self.n as f64).with("lambda", 1.0)
    }

    pub fn describe(&self) -> String {
        format!("matching(n={})", self.n)
    }
}

/// Derangement numbers D_0..=D_m via D_j = (j−1)(D_{j−1} + D_{j−2}).
pub fn derangements(m: usize) -> Vec<BigUint> {
    let mut d = vec![BigUint::one()];
    if m >= 1 {
        d.push(BigUint::zero());
    }
    for j in 2..=m {
        let next = (&d[j - 1] + &d[j - 2]) * (j as u64 - 1);
        d.push(next);
    }
    d
}

/// P(W = k) = C(n, k) D_{n−k} / n!.
pub fn matching_law(model: &MatchingModel) -> ExactLaw {
    let n = model.n;
    let d = derangements(n);
    let numerators = (0..=n)
        .map(|k| binomial(n as u64, k as u64) * &d[n - k])
        .collect();
    ExactLaw::from_numerators("matching", model.params(), numerators, factorial(n as u64))
        .expect("rencontres numbers sum to n!")
}
