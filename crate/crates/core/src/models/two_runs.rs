//! 2-runs on a cycle: X_i = ξ_i ξ_{i+1} with ξ_1..ξ_n i.i.d. Bernoulli(p)
//! and indices mod n. W = Σ X_i, T = Σ ξ_i ξ_{i+1} ξ_{i+2}.
//!
//! The neighbourhood sum Σ_i Σ_{j ∈ B_i \ {i}} X_i X_j over B_i = {i−1, i, i+1}
//! equals Σ_i (X_{i−1}X_i + X_i X_{i+1}) = 2T, so the joint law of (W, T) is
//! all the local-dependence condition needs.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use super::pbt::weights;
use super::ExactLaw;
use crate::error::{invalid, Error, Result};
use crate::rational::{self, format_rational};
use crate::report::Params;

/// Largest cycle handled with big-integer coefficients.
pub const EXACT_TWO_RUNS_MAX_N: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoRunsModel {
    n: usize,
    p: BigRational,
}

impl TwoRunsModel {
    /// Enforces the application's hypotheses n > 10, p < 1/2.
    pub fn new(n: usize, p: BigRational) -> Result<Self> {
        if n <= 10 {
            return Err(invalid("n", format!("2-runs requires n > 10, got {n}")));
        }
        if p >= BigRational::new(1.into(), 2.into()) {
            return Err(invalid("p", "2-runs requires p < 1/2"));
        }
        Self::cycle(n, p)
    }

    /// Any cycle with n ≥ 3 and 0 < p < 1; used for small-n oracle checks
    /// outside the theorem's hypotheses.
    pub fn cycle(n: usize, p: BigRational) -> Result<Self> {
        if n < 3 {
            return Err(invalid("n", format!("cycle needs n >= 3, got {n}")));
        }
        if p <= BigRational::zero() || p >= BigRational::one() {
            return Err(invalid("p", "must lie strictly between 0 and 1"));
        }
        Ok(TwoRunsModel { n, p })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> &BigRational {
        &self.p
    }

    pub fn p_f64(&self) -> f64 {
        rational::to_f64(&self.p)
    }

    /// λ = n p².
    pub fn lambda(&self) -> BigRational {
        BigRational::from_integer(self.n.into()) * &self.p * &self.p
    }

    pub fn lambda_f64(&self) -> f64 {
        rational::to_f64(&self.lambda())
    }

    pub fn satisfies_hypotheses(&self) -> bool {
        self.n > 10 && self.p < BigRational::new(1.into(), 2.into())
    }

    pub(crate) fn params(&self) -> Params {
        Params::new()
            .with("n", self.n as f64)
            .with("p", self.p_f64())
            .with("lambda", self.lambda_f64())
    }

    pub fn describe(&self) -> String {
        format!("two_runs(n={}, p={})", self.n, format_rational(&self.p))
    }
}

/// Coefficient ring of the transfer matrices: exact integers or floats.
trait Cell: Clone {
    fn nil() -> Self;
    fn is_nil(&self) -> bool;
    /// self += x·w
    fn mul_add(&mut self, x: &Self, w: &Self);
    fn product(a: &Self, b: &Self) -> Self;
    fn add(&mut self, x: &Self);
}

impl Cell for BigUint {
    fn nil() -> Self {
        <BigUint as Zero>::zero()
    }
    fn is_nil(&self) -> bool {
        <BigUint as Zero>::is_zero(self)
    }
    fn mul_add(&mut self, x: &Self, w: &Self) {
        match w.to_u64() {
            Some(1) => *self += x,
            Some(s) => *self += x * s,
            None => *self += x * w,
        }
    }
    fn product(a: &Self, b: &Self) -> Self {
        a * b
    }
    fn add(&mut self, x: &Self) {
        *self += x;
    }
}

impl Cell for f64 {
    fn nil() -> Self {
        0.0
    }
    fn is_nil(&self) -> bool {
        *self == 0.0
    }
    fn mul_add(&mut self, x: &Self, w: &Self) {
        *self += x * w;
    }
    fn product(a: &Self, b: &Self) -> Self {
        a * b
    }
    fn add(&mut self, x: &Self) {
        *self += x;
    }
}

/// Sweep over ξ_1..ξ_n with state (ξ_1, ξ_2, ξ_{i−1}, ξ_i), carrying a
/// polynomial in x (2-runs) and y (triples), flattened as w·(n+1) + t.
/// The cycle is closed by adding the wraparound run ξ_nξ_1 and the
/// triples (ξ_{n−1}, ξ_n, ξ_1), (ξ_n, ξ_1, ξ_2).
fn sweep<C: Cell>(n: usize, wt: [C; 2]) -> Vec<C> {
    let dim = n + 1;
    let state = |x1: usize, x2: usize, prev: usize, cur: usize| x1 << 3 | x2 << 2 | prev << 1 | cur;
    let mut polys: Vec<Vec<C>> = vec![Vec::new(); 16];
    for x1 in 0..2 {
        for x2 in 0..2 {
            let mut poly = vec![C::nil(); dim * dim];
            poly[(x1 * x2) * dim] = C::product(&wt[x1], &wt[x2]);
            polys[state(x1, x2, x1, x2)] = poly;
        }
    }
    for _ in 3..=n {
        let mut next: Vec<Vec<C>> = vec![Vec::new(); 16];
        for (s, src) in polys.iter().enumerate() {
            if src.is_empty() {
                continue;
            }
            let (x1, x2, prev, cur) = (s >> 3 & 1, s >> 2 & 1, s >> 1 & 1, s & 1);
            for bit in 0..2 {
                let dw = cur * bit;
                let dt = prev * cur * bit;
                let dst = &mut next[state(x1, x2, cur, bit)];
                if dst.is_empty() {
                    *dst = vec![C::nil(); dim * dim];
                }
                shift_add(dst, src, dim, dw, dt, &wt[bit]);
            }
        }
        polys = next;
    }
    let mut out = vec![C::nil(); dim * dim];
    for (s, src) in polys.iter().enumerate() {
        if src.is_empty() {
            continue;
        }
        let (x1, x2, prev, cur) = (s >> 3 & 1, s >> 2 & 1, s >> 1 & 1, s & 1);
        let dw = cur * x1;
        let dt = prev * cur * x1 + cur * x1 * x2;
        shift_add_unit(&mut out, src, dim, dw, dt);
    }
    out
}

fn shift_add<C: Cell>(dst: &mut [C], src: &[C], dim: usize, dw: usize, dt: usize, wt: &C) {
    for w in 0..dim - dw {
        for t in 0..dim - dt {
            let v = &src[w * dim + t];
            if !v.is_nil() {
                dst[(w + dw) * dim + t + dt].mul_add(v, wt);
            }
        }
    }
}

fn shift_add_unit<C: Cell>(dst: &mut [C], src: &[C], dim: usize, dw: usize, dt: usize) {
    for w in 0..dim - dw {
        for t in 0..dim - dt {
            let v = &src[w * dim + t];
            if !v.is_nil() {
                dst[(w + dw) * dim + t + dt].add(v);
            }
        }
    }
}

/// Exact joint law of (W, T), with a float shadow; `exact` is `None` for
/// float-mode laws of long cycles.
#[derive(Debug, Clone)]
pub struct JointLaw2Runs {
    n: usize,
    p: BigRational,
    exact: Option<(Vec<BigUint>, BigUint)>,
    shadow: Vec<f64>,
}

impl JointLaw2Runs {
    fn from_exact(model: &TwoRunsModel, numerators: Vec<BigUint>, denominator: BigUint) -> Self {
        let shadow = numerators
            .iter()
            .map(|c| rational::log_ratio(c, &denominator).exp())
            .collect();
        JointLaw2Runs {
            n: model.n,
            p: model.p.clone(),
            exact: Some((numerators, denominator)),
            shadow,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    fn dim(&self) -> usize {
        self.n + 1
    }

    /// Exact P(W = w, T = t); `None` in float mode.
    pub fn mass(&self, w: usize, t: usize) -> Option<BigRational> {
        let (num, den) = self.exact.as_ref()?;
        if w > self.n || t > self.n {
            return Some(BigRational::zero());
        }
        Some(BigRational::new(
            num[w * self.dim() + t].clone().into(),
            den.clone().into(),
        ))
    }

    pub fn mass_f64(&self, w: usize, t: usize) -> f64 {
        if w > self.n || t > self.n {
            return 0.0;
        }
        self.shadow[w * self.dim() + t]
    }

    /// Marginal law of W (exact mode only).
    pub fn marginal_w(&self) -> Option<ExactLaw> {
        let (num, den) = self.exact.as_ref()?;
        let dim = self.dim();
        let marg: Vec<BigUint> = (0..dim)
            .map(|w| num[w * dim..(w + 1) * dim].iter().sum())
            .collect();
        let model = TwoRunsModel {
            n: self.n,
            p: self.p.clone(),
        };
        Some(
            ExactLaw::from_numerators("two_runs", model.params(), marg, den.clone())
                .expect("joint law is normalized"),
        )
    }

    /// Exact E(T | W = w) when P(W = w) > 0.
    pub fn conditional_t_mean(&self, w: usize) -> Option<BigRational> {
        let (num, _) = self.exact.as_ref()?;
        let dim = self.dim();
        let row = &num[w * dim..(w + 1) * dim];
        let mass: BigUint = row.iter().sum();
        if mass.is_zero() {
            return None;
        }
        let first: BigUint = row.iter().enumerate().map(|(t, c)| c * t).sum();
        Some(BigRational::new(first.into(), mass.into()))
    }

    fn conditional_t_mean_f64(&self, w: usize) -> Option<f64> {
        let dim = self.dim();
        let row = &self.shadow[w * dim..(w + 1) * dim];
        let mass: f64 = row.iter().sum();
        if mass == 0.0 {
            return None;
        }
        Some(
            row.iter()
                .enumerate()
                .map(|(t, c)| c * t as f64)
                .sum::<f64>()
                / mass,
        )
    }
}

/// Exact joint law of (W, T) by the 16-state sweep; n ≤ 64.
pub fn two_runs_joint(model: &TwoRunsModel) -> Result<JointLaw2Runs> {
    if model.n > EXACT_TWO_RUNS_MAX_N {
        return Err(Error::SizeLimit {
            what: "2-runs n",
            value: model.n,
            limit: EXACT_TWO_RUNS_MAX_N,
        });
    }
    let (a, q, b) = weights(&model.p);
    let num = sweep(model.n, [q, a]);
    let den = num_traits::pow(b, model.n);
    Ok(JointLaw2Runs::from_exact(model, num, den))
}

/// Float-valued sweep for cycles beyond the exact-mode limit.
pub fn two_runs_joint_approx(model: &TwoRunsModel) -> JointLaw2Runs {
    let p = model.p_f64();
    let shadow = sweep(model.n, [1.0 - p, p]);
    JointLaw2Runs {
        n: model.n,
        p: model.p.clone(),
        exact: None,
        shadow,
    }
}

/// Exact joint law of (W, T) as the trace of the n-th power of the 4×4
/// transfer matrix on pair states (ξ_i, ξ_{i+1}). No index is
/// distinguished, so this is an independent ordering of the same sum.
pub fn two_runs_joint_trace(model: &TwoRunsModel) -> Result<JointLaw2Runs> {
    if model.n > EXACT_TWO_RUNS_MAX_N {
        return Err(Error::SizeLimit {
            what: "2-runs n",
            value: model.n,
            limit: EXACT_TWO_RUNS_MAX_N,
        });
    }
    let n = model.n;
    let dim = n + 1;
    let (a, q, b) = weights(&model.p);
    let wt = [q, a];
    let mut out = vec![BigUint::zero(); dim * dim];
    for start in 0..4usize {
        let mut v: Vec<Vec<BigUint>> = vec![vec![BigUint::zero(); dim * dim]; 4];
        v[start][0] = BigUint::one();
        for _ in 0..n {
            let mut next = vec![vec![BigUint::zero(); dim * dim]; 4];
            for (s, src) in v.iter().enumerate() {
                let (x0, x1) = (s >> 1, s & 1);
                for x2 in 0..2 {
                    let dw = x1 * x2;
                    let dt = x0 * x1 * x2;
                    shift_add(&mut next[x1 << 1 | x2], src, dim, dw, dt, &wt[x2]);
                }
            }
            v = next;
        }
        for (o, c) in out.iter_mut().zip(&v[start]) {
            *o += c;
        }
    }
    let den = num_traits::pow(b, n);
    Ok(JointLaw2Runs::from_exact(model, out, den))
}

/// Exact law of W from the sweep's marginal.
pub fn two_runs_law(model: &TwoRunsModel) -> Result<ExactLaw> {
    Ok(two_runs_joint(model)?.marginal_w().expect("exact sweep"))
}

/// Exact law of W as trace(M^n) for the 2×2 matrix M[s][t] = wt(t)·x^{st};
/// no bound on n beyond cost.
pub fn two_runs_law_transfer(model: &TwoRunsModel) -> ExactLaw {
    let n = model.n;
    let (a, q, b) = weights(&model.p);
    let wt = [q, a];
    let mut total = vec![BigUint::zero(); n + 1];
    for start in 0..2usize {
        let mut v = vec![vec![BigUint::zero(); n + 1]; 2];
        v[start][0] = BigUint::one();
        for _ in 0..n {
            let mut next = vec![vec![BigUint::zero(); n + 1]; 2];
            for s in 0..2 {
                for t in 0..2 {
                    let shift = s * t;
                    for w in 0..=n - shift {
                        if !v[s][w].is_zero() {
                            next[t][w + shift].mul_add(&v[s][w], &wt[t]);
                        }
                    }
                }
            }
            v = next;
        }
        for (o, c) in total.iter_mut().zip(&v[start]) {
            *o += c;
        }
    }
    ExactLaw::from_numerators("two_runs", model.params(), total, num_traits::pow(b, n))
        .expect("transfer matrix law is normalized")
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaConditionRow {
    pub w: u64,
    /// E(2T | W = w)/w²; `None` when P(W = w) = 0.
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_exact: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaConditionTable {
    pub n: usize,
    pub p: f64,
    pub theta: u64,
    pub exact: bool,
    pub rows: Vec<DeltaConditionRow>,
    /// max δ(w) over the defined rows.
    pub delta_star: f64,
    /// δ*·np, the constant C in δ ≤ C/(np).
    pub fitted_c: f64,
}

/// δ(w) = E(2T | W = w)/w² for 1 ≤ w ≤ θ.
pub fn delta_condition_2runs(model: &TwoRunsModel, theta: u64) -> Result<DeltaConditionTable> {
    if theta < 1 {
        return Err(invalid("theta", "must be >= 1"));
    }
    let joint = if model.n <= EXACT_TWO_RUNS_MAX_N {
        two_runs_joint(model)?
    } else {
        two_runs_joint_approx(model)
    };
    let mut rows = Vec::new();
    let mut delta_star = 0.0f64;
    for w in 1..=theta.min(model.n as u64) {
        let wu = w as usize;
        let w2 = (w * w) as i64;
        let (delta, delta_exact) = if joint.is_exact() {
            match joint.conditional_t_mean(wu) {
                Some(et) => {
                    let d = et * BigRational::new(2.into(), w2.into());
                    (Some(rational::to_f64(&d)), Some(format_rational(&d)))
                }
                None => (None, None),
            }
        } else {
            (
                joint
                    .conditional_t_mean_f64(wu)
                    .map(|et| 2.0 * et / w2 as f64),
                None,
            )
        };
        if let Some(d) = delta {
            delta_star = delta_star.max(d);
        }
        rows.push(DeltaConditionRow {
            w,
            delta,
            delta_exact,
        });
    }
    let np = model.n as f64 * model.p_f64();
    Ok(DeltaConditionTable {
        n: model.n,
        p: model.p_f64(),
        theta,
        exact: joint.is_exact(),
        rows,
        delta_star,
        fitted_c: delta_star * np,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn hypotheses() {
        assert!(TwoRunsModel::new(10, q(1, 4)).is_err());
        assert!(TwoRunsModel::new(11, q(1, 2)).is_err());
        assert!(TwoRunsModel::new(11, q(1, 4))
            .unwrap()
            .satisfies_hypotheses());
        assert!(!TwoRunsModel::cycle(8, q(1, 4))
            .unwrap()
            .satisfies_hypotheses());
        assert!(TwoRunsModel::cycle(2, q(1, 4)).is_err());
    }

    #[test]
    fn three_routes_agree() {
        for (n, p) in [(3, q(1, 2)), (5, q(1, 3)), (9, q(2, 7))] {
            let m = TwoRunsModel::cycle(n, p).unwrap();
            let a = two_runs_joint(&m).unwrap();
            let b = two_runs_joint_trace(&m).unwrap();
            for w in 0..=n {
                for t in 0..=n {
                    assert_eq!(a.mass(w, t), b.mass(w, t), "n={n} w={w} t={t}");
                }
            }
            assert_eq!(a.marginal_w().unwrap(), two_runs_law_transfer(&m));
            assert_eq!(a.marginal_w().unwrap().mean(), m.lambda());
        }
    }

    #[test]
    fn all_ones_cycle() {
        let m = TwoRunsModel::cycle(6, q(1, 2)).unwrap();
        let j = two_runs_joint(&m).unwrap();
        assert_eq!(j.mass(6, 6), Some(q(1, 64)));
        // n-1 runs would need exactly one zero, which breaks two runs
        assert!(j.marginal_w().unwrap().mass(5).is_zero());
    }

    #[test]
    fn float_sweep_tracks_exact() {
        let m = TwoRunsModel::cycle(20, q(1, 5)).unwrap();
        let a = two_runs_joint(&m).unwrap();
        let b = two_runs_joint_approx(&m);
        for w in 0..=20 {
            for t in 0..=20 {
                assert!((a.mass_f64(w, t) - b.mass_f64(w, t)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn delta_table_starts_at_zero() {
        let m = TwoRunsModel::new(20, q(1, 5)).unwrap();
        let t = delta_condition_2runs(&m, 3).unwrap();
        assert_eq!(t.rows[0].delta, Some(0.0));
        assert!(t.exact);
        assert!(t.fitted_c > 0.0);
    }
}
