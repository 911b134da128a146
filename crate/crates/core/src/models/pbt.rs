use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::ExactLaw;
use crate::error::{invalid, Result};
use crate::rational::{self, format_rational};
use crate::report::Params;

/// Independent indicators with P(X_i = 1) = p_i.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonBinomialModel {
    p: Vec<BigRational>,
}

impl PoissonBinomialModel {
    pub fn new(p: Vec<BigRational>) -> Result<Self> {
        if p.is_empty() {
            return Err(invalid("p", "needs at least one indicator"));
        }
        if p.iter().any(|x| x.is_negative() || x > &BigRational::one()) {
            return Err(invalid("p", "every p_i must lie in [0, 1]"));
        }
        if p.iter().all(Zero::is_zero) {
            return Err(invalid("p", "lambda = sum p_i must be > 0"));
        }
        Ok(PoissonBinomialModel { p })
    }

    /// `n` indicators sharing one success probability.
    pub fn iid(n: usize, p: BigRational) -> Result<Self> {
        Self::new(vec![p; n])
    }

    pub fn from_f64s(p: &[f64]) -> Result<Self> {
        Self::new(p.iter().map(|&x| rational::from_f64(x)).collect())
    }

    pub fn probs(&self) -> &[BigRational] {
        &self.p
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn lambda(&self) -> BigRational {
        self.p.iter().sum()
    }

    pub fn lambda_f64(&self) -> f64 {
        rational::to_f64(&self.lambda())
    }

    /// p̃ = max p_i.
    pub fn p_tilde(&self) -> BigRational {
        self.p.iter().max().cloned().expect("non-empty")
    }

    pub fn p_tilde_f64(&self) -> f64 {
        rational::to_f64(&self.p_tilde())
    }

    pub(crate) fn params(&self) -> Params {
        let mut params = Params::new()
            .with("n", self.n() as f64)
            .with("lambda", self.lambda_f64())
            .with("p_tilde", self.p_tilde_f64());
        if self.is_iid() {
            params = params.with("p", rational::to_f64(&self.p[0]));
        }
        params
    }

    pub fn is_iid(&self) -> bool {
        self.p.iter().all(|x| x == &self.p[0])
    }

    pub fn describe(&self) -> String {
        if self.is_iid() {
            format!("pbt(n={}, p={})", self.n(), format_rational(&self.p[0]))
        } else {
            let ps: Vec<String> = self.p.iter().map(format_rational).collect();
            format!("pbt(p=[{}])", ps.join(", "))
        }
    }
}

/// Splits p = a/b into the integer weights (a, b − a, b).
pub(crate) fn weights(p: &BigRational) -> (BigUint, BigUint, BigUint) {
    let a = p.numer().to_biguint().expect("p >= 0");
    let b = p.denom().to_biguint().expect("positive denominator");
    let q = &b - &a;
    (a, q, b)
}

/// Multiplies `poly` in place by (q + a·x).
pub(crate) fn mul_linear(poly: &mut Vec<BigUint>, a: &BigUint, q: &BigUint) {
    poly.push(BigUint::zero());
    let small = a.to_u64().zip(q.to_u64());
    for w in (0..poly.len()).rev() {
        let carry = if w > 0 {
            Some(poly[w - 1].clone())
        } else {
            None
        };
        match small {
            Some((a, q)) => {
                poly[w] *= q;
                if let Some(mut c) = carry {
                    c *= a;
                    poly[w] += c;
                }
            }
            None => {
                poly[w] *= q;
                if let Some(c) = carry {
                    poly[w] += c * a;
                }
            }
        }
    }
}

/// Law of W = Σ X_i by sequential convolution: after i indicators the
/// numerator polynomial Π (b_j − a_j + a_j x) has support 0..=i.
pub fn pbt_law(model: &PoissonBinomialModel) -> ExactLaw {
    if model.is_iid() {
        return binomial_law(model);
    }
    let mut poly = vec![BigUint::one()];
    let mut denom = BigUint::one();
    for p in model.probs() {
        let (a, q, b) = weights(p);
        mul_linear(&mut poly, &a, &q);
        denom *= b;
    }
    ExactLaw::from_numerators("pbt", model.params(), poly, denom)
        .expect("convolution of probability vectors is normalized")
}

/// Identical p = a/b: numerators C(n, w) a^w (b − a)^{n−w} over b^n.
fn binomial_law(model: &PoissonBinomialModel) -> ExactLaw {
    let n = model.n();
    let (a, q, b) = weights(&model.probs()[0]);
    let mut a_pow = vec![BigUint::one()];
    let mut q_pow = vec![BigUint::one()];
    for i in 0..n {
        a_pow.push(&a_pow[i] * &a);
        q_pow.push(&q_pow[i] * &q);
    }
    let mut choose = BigUint::one();
    let mut poly = Vec::with_capacity(n + 1);
    for w in 0..=n {
        if w > 0 {
            choose = choose * (n - w + 1) / w;
        }
        poly.push(&choose * &a_pow[w] * &q_pow[n - w]);
    }
    ExactLaw::from_numerators("pbt", model.params(), poly, num_traits::pow(b, n))
        .expect("binomial masses are normalized")
}

/// Law of W with indicator `skip` removed, from the full law by exact
/// deconvolution. Numerators are over `full.denominator / b_skip`.
pub(crate) fn leave_one_out(full: &[BigUint], p: &BigRational) -> Vec<BigUint> {
    let (a, q, _) = weights(p);
    let n = full.len() - 1;
    let mut out = vec![BigUint::zero(); n];
    let full: Vec<BigInt> = full.iter().cloned().map(BigInt::from).collect();
    let (a, q) = (BigInt::from(a), BigInt::from(q));
    if !q.is_zero() {
        // full[w] = q·out[w] + a·out[w-1], solved upward
        let mut prev = BigInt::zero();
        for w in 0..n {
            let v = (&full[w] - &a * &prev) / &q;
            out[w] = v.to_biguint().expect("exact deconvolution");
            prev = v;
        }
    } else {
        // p = 1: full[w] = a·out[w-1]
        for w in 0..n {
            out[w] = (&full[w + 1] / &a)
                .to_biguint()
                .expect("exact deconvolution");
        }
    }
    out
}
