//! Independent oracles: brute-force enumeration and closed forms in exact
//! rationals, sharing no code with the library beyond its public types.
#![allow(dead_code)]

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

pub fn int(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn fact(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |a, b| a * b)
}

pub fn choose(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    fact(n) / (fact(k) * fact(n - k))
}

pub fn to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap()
}

/// Law of (W, T) for 2-runs on the n-cycle by summing over all 2^n
/// sequences: W counts i with ξ_i ξ_{i+1} = 1, T counts i with
/// ξ_i ξ_{i+1} ξ_{i+2} = 1.
pub fn brute_two_runs_joint(n: usize, p: &BigRational) -> BTreeMap<(usize, usize), BigRational> {
    assert!(n <= 22);
    let q1 = BigRational::one() - p;
    let pow = |x: &BigRational, e: usize| -> BigRational {
        (0..e).fold(BigRational::one(), |a, _| a * x)
    };
    let mut counts: BTreeMap<(usize, usize, usize), u64> = BTreeMap::new();
    for bits in 0u32..(1 << n) {
        let xi = |i: usize| (bits >> (i % n)) & 1 == 1;
        let ones = bits.count_ones() as usize;
        let w = (0..n).filter(|&i| xi(i) && xi(i + 1)).count();
        let t = (0..n).filter(|&i| xi(i) && xi(i + 1) && xi(i + 2)).count();
        *counts.entry((w, t, ones)).or_default() += 1;
    }
    let mut out = BTreeMap::new();
    for ((w, t, ones), c) in counts {
        let weight = int(c) * pow(p, ones) * pow(&q1, n - ones);
        *out.entry((w, t)).or_insert_with(BigRational::zero) += weight;
    }
    out
}

pub fn brute_two_runs_law(n: usize, p: &BigRational) -> Vec<BigRational> {
    let mut law = vec![BigRational::zero(); n + 1];
    for ((w, _), m) in brute_two_runs_joint(n, p) {
        law[w] += m;
    }
    law
}

/// Every permutation of 0..n in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    let mut used = vec![false; n];
    fn rec(n: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for v in 0..n {
            if !used[v] {
                used[v] = true;
                cur.push(v);
                rec(n, cur, used, out);
                cur.pop();
                used[v] = false;
            }
        }
    }
    rec(n, &mut cur, &mut used, &mut out);
    out
}

pub fn fixed_points(pi: &[usize]) -> usize {
    pi.iter().enumerate().filter(|(i, &v)| *i == v).count()
}

/// Law of the number of fixed points by enumerating all n! permutations.
pub fn brute_matching_law(n: usize) -> Vec<BigRational> {
    let perms = permutations(n);
    let total = int(perms.len() as u64);
    let mut counts = vec![0u64; n + 1];
    for pi in &perms {
        counts[fixed_points(pi)] += 1;
    }
    counts.into_iter().map(|c| int(c) / &total).collect()
}

/// π^s from π and I: π^s(I) = I, π^s(π⁻¹(I)) = π(I), π^s(j) = π(j) otherwise.
pub fn size_biased_perm(pi: &[usize], i: usize) -> Vec<usize> {
    let n = pi.len();
    let pre = (0..n).find(|&j| pi[j] == i).unwrap();
    (0..n)
        .map(|j| {
            if j == i {
                i
            } else if j == pre {
                pi[i]
            } else {
                pi[j]
            }
        })
        .collect()
}

/// Joint law of (W, Δ) for the matching coupling: masses[w][Δ + 1], by
/// enumerating every permutation and every uniform I.
pub fn brute_matching_coupling(n: usize) -> Vec<[BigRational; 3]> {
    let perms = permutations(n);
    let total = int((perms.len() * n) as u64);
    let mut counts = vec![[0u64; 3]; n + 1];
    for pi in &perms {
        let w = fixed_points(pi) as i64;
        for i in 0..n {
            let ws = fixed_points(&size_biased_perm(pi, i)) as i64;
            let d = w + 1 - ws;
            assert!((-1..=1).contains(&d), "Δ = {d} outside {{-1, 0, 1}}");
            counts[w as usize][(d + 1) as usize] += 1;
        }
    }
    counts
        .into_iter()
        .map(|c| c.map(|x| int(x) / &total))
        .collect()
}

pub fn derangement(m: u64) -> BigInt {
    // D_m = m! Σ_{j ≤ m} (−1)^j / j!
    let mut s = BigInt::zero();
    for j in 0..=m {
        let t = fact(m) / fact(j);
        if j % 2 == 0 {
            s += t;
        } else {
            s -= t;
        }
    }
    s
}

/// P(Δ = −1 | W = w) for the matching coupling: with m = n − w non-fixed
/// points, Δ = −1 iff I sits in a 2-cycle, and a derangement of m points
/// has on average m(m−1)D_{m−2}/D_m such points.
pub fn matching_minus_conditional(n: u64, w: u64) -> BigRational {
    let m = n - w;
    if m < 2 {
        return BigRational::zero();
    }
    BigRational::new(
        BigInt::from(m * (m - 1)) * derangement(m - 2),
        BigInt::from(n) * derangement(m),
    )
}

/// Binomial(n, p) pmf in closed form.
pub fn binomial_pmf(n: u64, p: &BigRational) -> Vec<BigRational> {
    let q1 = BigRational::one() - p;
    (0..=n)
        .map(|k| {
            let mut v = BigRational::from_integer(choose(n, k));
            for _ in 0..k {
                v *= p;
            }
            for _ in 0..(n - k) {
                v *= &q1;
            }
            v
        })
        .collect()
}

/// Poisson-binomial law of independent indicators by enumerating all
/// 2^n outcomes.
pub fn brute_pbt_law(p: &[BigRational]) -> Vec<BigRational> {
    let n = p.len();
    let mut law = vec![BigRational::zero(); n + 1];
    for bits in 0u32..(1 << n) {
        let mut w = BigRational::one();
        for (i, pi) in p.iter().enumerate() {
            w *= if (bits >> i) & 1 == 1 {
                pi.clone()
            } else {
                BigRational::one() - pi
            };
        }
        law[bits.count_ones() as usize] += w;
    }
    law
}

/// E over (X, I) of 1{W = w, X_I = 1} for independent indicators with I
/// chosen with probability p_i/λ, by enumeration.
pub fn brute_pbt_coupling_plus(p: &[BigRational]) -> Vec<BigRational> {
    let n = p.len();
    let lambda: BigRational = p.iter().sum();
    let mut out = vec![BigRational::zero(); n + 1];
    for bits in 0u32..(1 << n) {
        let mut weight = BigRational::one();
        for (i, pi) in p.iter().enumerate() {
            weight *= if (bits >> i) & 1 == 1 {
                pi.clone()
            } else {
                BigRational::one() - pi
            };
        }
        let w = bits.count_ones() as usize;
        for (i, pi) in p.iter().enumerate() {
            if (bits >> i) & 1 == 1 {
                out[w] += &weight * pi / &lambda;
            }
        }
    }
    out
}

/// e^{−λ} Σ_{j<k} λ^j/j! subtracted from one, with e^{−λ} from its Taylor
/// series truncated after `terms` terms, in exact rationals.
pub fn poisson_tail_series(lambda: &BigRational, k: u64, terms: u64) -> BigRational {
    let mut e = BigRational::zero();
    let mut t = BigRational::one();
    for j in 0..terms {
        if j > 0 {
            t = t * lambda / int(j);
        }
        e += &t;
    }
    let mut lower = BigRational::zero();
    let mut t = BigRational::one();
    for j in 0..k {
        if j > 0 {
            t = t * lambda / int(j);
        }
        lower += &t;
    }
    BigRational::one() - lower / e
}

/// P(Y = k) as a rational approximation with the same truncated e^λ.
pub fn poisson_pmf_series(lambda: &BigRational, k: u64, terms: u64) -> BigRational {
    poisson_tail_series(lambda, k, terms) - poisson_tail_series(lambda, k + 1, terms)
}
