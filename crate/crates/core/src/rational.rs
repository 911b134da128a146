//! Exact-rational helpers shared by the model laws and the g₁ series.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// ln(num/den) for non-negative integers, without overflow for huge operands.
///
/// The quotient is formed with ~80 significant bits by integer division so
/// the result keeps full double precision even when num and den have
/// thousands of digits.
pub fn log_ratio(num: &BigUint, den: &BigUint) -> f64 {
    assert!(!den.is_zero(), "zero denominator");
    if num.is_zero() {
        return f64::NEG_INFINITY;
    }
    let shift = den.bits() as i64 - num.bits() as i64 + 80;
    let q = if shift >= 0 {
        (num << shift as u64) / den
    } else {
        num / (den << (-shift) as u64)
    };
    let e = q.bits() as i64 - 1;
    let mantissa = q.to_f64().expect("80-bit quotient fits f64") / 2f64.powi(e as i32);
    let exponent = e - shift;
    if exponent.abs() < 1000 {
        (mantissa * 2f64.powi(exponent as i32)).ln()
    } else {
        mantissa.ln() + exponent as f64 * std::f64::consts::LN_2
    }
}

/// ln of a positive rational; `-inf` for zero.
pub fn ln_rational(r: &BigRational) -> f64 {
    assert!(!r.is_negative(), "log of negative rational");
    let n = r.numer().magnitude();
    let d = r.denom().magnitude();
    log_ratio(n, d)
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        let l = ln_rational(&r.abs());
        let v = l.exp();
        if r.is_negative() {
            -v
        } else {
            v
        }
    })
}

/// The exact dyadic rational a double represents.
pub fn from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

/// Parses `a/b`, a decimal such as `0.05`, or scientific notation such as
/// `2.5e-3`, exactly.
pub fn parse_rational(input: &str) -> Result<BigRational> {
    let err = || Error::ParseRational {
        input: input.to_string(),
    };
    let s = input.trim();
    if let Some((a, b)) = s.split_once('/') {
        let n: BigInt = a.trim().parse().map_err(|_| err())?;
        let d: BigInt = b.trim().parse().map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(BigRational::new(n, d));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| err())?),
        None => (s, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return Err(err());
    }
    let digits: BigInt = format!("{int_part}{frac_part}0")
        .parse()
        .map_err(|_| err())?;
    let scale = exp - frac_part.len() as i32 - 1;
    let ten = BigInt::from(10u8);
    let mut r = if scale >= 0 {
        BigRational::from_integer(digits * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(digits, num_traits::pow(ten, (-scale) as usize))
    };
    if neg {
        r = -r;
    }
    Ok(r)
}

/// Formats a rational as `num/den` in lowest terms (integers print bare).
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * i)
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}
