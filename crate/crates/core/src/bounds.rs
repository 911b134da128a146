//! Bound checking: right-hand sides of the moderate-deviation theorems,
//! exact tail-ratio experiments for the three applications, and exact
//! checks of the supporting inequalities. Every unspecified absolute
//! constant is fitted over a grid, never assumed.

use std::ops::RangeInclusive;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::dependence::{
    family_independence_check, greedy_coloring, neighborhood_stats, residue_classes,
    two_runs_graph, FamilyIndependence, IndicatorModel, INDEPENDENCE_ENUM_MAX_N,
};
use crate::error::{invalid, Error, Result};
use crate::models::{
    delta_condition_2runs, matching_law, pbt_law, two_runs_law_transfer, ExactLaw, MatchingModel,
    PoissonBinomialModel, TwoRunsModel,
};
use crate::poisson::{poisson_tail_rational, PoissonLaw, FLOAT_TOL};
use crate::rational::{self, ln_rational};
use crate::report::{BoundReport, Direction, GridRow, Params, ReportSet};
use crate::stein::{g1, G1Method};

/// Below this |ln ratio| the tail ratio is recomputed in rationals, since
/// the float difference would be dominated by round-off.
const RATIO_EXACT_SWITCH: f64 = 1e-6;
/// Largest λ for which the rational Poisson tail is used.
const RATIO_EXACT_MAX_LAMBDA: f64 = 64.0;

/// η_k = sup over integers λ ≤ r ≤ k of P(W ≥ r)/P(Y ≥ r).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaK {
    pub lambda: f64,
    pub k: u64,
    pub value: f64,
    /// The r attaining the supremum.
    pub argmax: u64,
}

pub fn eta_k(law: &ExactLaw, lambda: f64, k: u64) -> Result<EtaK> {
    let poi = PoissonLaw::new(lambda)?;
    if (k as f64) < lambda {
        return Err(Error::RightTailOnly {
            k: k as i64,
            lambda,
        });
    }
    let tails = law.ln_tails();
    let mut best = (f64::NEG_INFINITY, k);
    for r in (lambda.ceil() as u64)..=k {
        let ln_w = tails.get(r as usize).copied().unwrap_or(f64::NEG_INFINITY);
        let ratio = (ln_w - poi.ln_tail(r)).exp();
        if ratio > best.0 {
            best = (ratio, r);
        }
    }
    Ok(EtaK {
        lambda,
        k,
        value: best.0,
        argmax: best.1,
    })
}

/// η_k, or 0 when no integer r satisfies λ ≤ r ≤ k.
fn eta_or_zero(law: &ExactLaw, lambda: f64, k: u64) -> Result<f64> {
    if (k as f64) < lambda {
        PoissonLaw::new(lambda)?;
        return Ok(0.0);
    }
    Ok(eta_k(law, lambda, k)?.value)
}

fn xi_checked(lambda: f64, k: u64) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(invalid("lambda", "must be finite and > 0"));
    }
    if (k as f64) < lambda {
        return Err(Error::RightTailOnly {
            k: k as i64,
            lambda,
        });
    }
    Ok((k as f64 - lambda) / lambda.sqrt())
}

/// The two summands of the local-dependence bound with C = c = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thm21Rhs {
    pub xi: f64,
    /// m²{p̃(1+ξ²) + δλ(1+ξ²+ξ³/√λ)}
    pub local: f64,
    /// (1 ∧ 1/λ) m² exp(−θ/m)
    pub tail: f64,
    pub total: f64,
}

pub fn thm21_rhs(
    m: usize,
    p_tilde: f64,
    delta: f64,
    lambda: f64,
    theta: f64,
    k: u64,
) -> Result<Thm21Rhs> {
    let xi = xi_checked(lambda, k)?;
    if m == 0 {
        return Err(invalid("m", "must be >= 1"));
    }
    let m = m as f64;
    let x2 = xi * xi;
    let local =
        m * m * (p_tilde * (1.0 + x2) + delta * lambda * (1.0 + x2 + x2 * xi / lambda.sqrt()));
    let tail = (1.0f64).min(1.0 / lambda) * m * m * (-theta / m).exp();
    Ok(Thm21Rhs {
        xi,
        local,
        tail,
        total: local + tail,
    })
}

/// (δ₁ + δ₂λ)(1 + ξ²), the size-bias bound with C = 1.
pub fn thm23_rhs(delta1: f64, delta2: f64, lambda: f64, k: u64) -> Result<f64> {
    let xi = xi_checked(lambda, k)?;
    Ok((delta1 + delta2 * lambda) * (1.0 + xi * xi))
}

/// Applications with an exact law of W and a moderate-deviation shape.
#[derive(Debug, Clone, PartialEq)]
pub enum RatioModel {
    Pbt(PoissonBinomialModel),
    Matching(MatchingModel),
    TwoRuns(TwoRunsModel),
}

impl RatioModel {
    pub fn name(&self) -> &'static str {
        match self {
            RatioModel::Pbt(_) => "pbt",
            RatioModel::Matching(_) => "matching",
            RatioModel::TwoRuns(_) => "two_runs",
        }
    }

    pub fn lambda(&self) -> BigRational {
        match self {
            RatioModel::Pbt(m) => m.lambda(),
            RatioModel::Matching(_) => BigRational::from_integer(1.into()),
            RatioModel::TwoRuns(m) => m.lambda(),
        }
    }

    pub fn law(&self) -> ExactLaw {
        match self {
            RatioModel::Pbt(m) => pbt_law(m),
            RatioModel::Matching(m) => matching_law(m),
            RatioModel::TwoRuns(m) => two_runs_law_transfer(m),
        }
    }

    fn params(&self) -> Params {
        match self {
            RatioModel::Pbt(m) => m.params(),
            RatioModel::Matching(m) => m.params(),
            RatioModel::TwoRuns(m) => m.params(),
        }
    }

    /// Bound shape with C = 1: p̃(1+ξ²), k²/n, p + pξ² + ξ³/√n.
    pub fn shape(&self, k: u64, xi: f64) -> f64 {
        match self {
            RatioModel::Pbt(m) => m.p_tilde_f64() * (1.0 + xi * xi),
            RatioModel::Matching(m) => (k * k) as f64 / m.n() as f64,
            RatioModel::TwoRuns(m) => {
                let p = m.p_f64();
                p + p * xi * xi + xi.powi(3) / (m.n() as f64).sqrt()
            }
        }
    }

    /// Default smallness constant c of the admissible region shape ≤ c.
    pub fn default_smallness(&self) -> f64 {
        match self {
            RatioModel::Pbt(_) => 0.5,
            RatioModel::Matching(_) => 0.25,
            RatioModel::TwoRuns(_) => 3.0,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            RatioModel::Pbt(m) => m.describe(),
            RatioModel::Matching(m) => m.describe(),
            RatioModel::TwoRuns(m) => m.describe(),
        }
    }
}

/// |P(W ≥ k)/P(Y ≥ k) − 1| against the model's shape for each k in
/// `k_range`. Rows with shape > `smallness` are reported but marked
/// inadmissible; unattainable k (P(W ≥ k) = 0) are excluded from fitting.
/// The report's fitted constant is the max ratio over admissible rows.
pub fn ratio_experiment(
    model: &RatioModel,
    k_range: RangeInclusive<u64>,
    smallness: f64,
) -> Result<BoundReport> {
    let lambda_exact = model.lambda();
    let lambda = rational::to_f64(&lambda_exact);
    let poi = PoissonLaw::new(lambda)?;
    if (*k_range.start() as f64) < lambda {
        return Err(Error::RightTailOnly {
            k: *k_range.start() as i64,
            lambda,
        });
    }
    if k_range.is_empty() {
        return Err(invalid("k_range", "is empty"));
    }
    if !(smallness > 0.0) {
        return Err(invalid("smallness", "must be > 0"));
    }
    let law = model.law();
    let tails = law.ln_tails();
    let mut report = BoundReport::new(format!("ratio.{}", model.name()), Direction::Upper);
    let mut admissible_k: Vec<u64> = Vec::new();
    for k in k_range {
        let xi = (k as f64 - lambda) / lambda.sqrt();
        let shape = model.shape(k, xi);
        let params = model.params().with("k", k as f64).with("xi", xi);
        let ln_w = tails.get(k as usize).copied().unwrap_or(f64::NEG_INFINITY);
        if ln_w == f64::NEG_INFINITY {
            report.push(GridRow::new(params, 1.0, shape).exclude("unattainable: P(W >= k) = 0"));
            continue;
        }
        let d = ln_w - poi.ln_tail(k);
        let lhs = if d.abs() < RATIO_EXACT_SWITCH && lambda <= RATIO_EXACT_MAX_LAMBDA {
            let exact = law.tail_exact(k) / poisson_tail_rational(&lambda_exact, k)?;
            let diff = (exact - BigRational::from_integer(1.into())).abs();
            if diff.is_zero() {
                0.0
            } else {
                ln_rational(&diff).exp()
            }
        } else {
            d.exp_m1().abs()
        };
        let admissible = shape <= smallness;
        if admissible {
            admissible_k.push(k);
        }
        report.push(GridRow::new(params, lhs, shape).admissible(admissible));
    }
    match (admissible_k.first(), admissible_k.last()) {
        (Some(lo), Some(hi)) => report.note(format!(
            "smallness c = {smallness}: admissible k in {lo}..={hi} ({} points)",
            admissible_k.len()
        )),
        _ => report.note(format!("smallness c = {smallness}: no admissible k")),
    }
    Ok(report.finish(f64::INFINITY, 0.0))
}

/// δ(w) = E(2T | W = w)/w² against the shape 1/(np) for 1 ≤ w ≤ θ; the
/// fitted constant is C in δ ≤ C/(np).
pub fn delta_condition_report(model: &TwoRunsModel, theta: u64) -> Result<BoundReport> {
    let table = delta_condition_2runs(model, theta)?;
    let np = model.n() as f64 * model.p_f64();
    let mut report = BoundReport::new("delta_condition.two_runs", Direction::Upper);
    for row in &table.rows {
        let params = model
            .params()
            .with("theta", theta as f64)
            .with("w", row.w as f64);
        match row.delta {
            Some(d) => report.push(GridRow::new(params, d, 1.0 / np)),
            None => {
                report.push(GridRow::new(params, 0.0, 1.0 / np).exclude("undefined: P(W = w) = 0"))
            }
        }
    }
    Ok(report.finish(f64::INFINITY, 0.0))
}

/// Bennett's inequality for a sum S of independent summands ≤ a with
/// mean ≤ 0 and variance sum ≤ B², applied to S = W − center for an
/// exact law of W:
///
/// * `bennett.full`: P(S ≥ x) ≤ exp(−(B²/a²)((1+u)ln(1+u) − u)), u = ax/B², x > 0;
/// * `bennett.simplified`: P(S ≥ x) ≤ exp(−(x/2a) ln(1+u)), only for x > 4B²/a.
pub fn bennett_hoeffding_check(
    a: f64,
    b_sq: f64,
    law: &ExactLaw,
    center: &BigRational,
    x_grid: &[f64],
) -> Result<ReportSet> {
    if !(a > 0.0 && b_sq > 0.0) {
        return Err(invalid("a, B^2", "must both be > 0"));
    }
    let tails = law.ln_tails();
    let threshold = 4.0 * b_sq / a;
    let mut full = BoundReport::new("bennett.full", Direction::Upper);
    let mut simple = BoundReport::new("bennett.simplified", Direction::Upper);
    for &x in x_grid {
        if !(x > 0.0 && x.is_finite()) {
            return Err(invalid(
                "x",
                format!("grid points must be finite and > 0, got {x}"),
            ));
        }
        let level = (center + rational::from_f64(x)).ceil();
        let k = if level.is_negative() {
            0
        } else {
            level.to_integer().try_into().unwrap_or(u64::MAX)
        };
        let ln_lhs = tails.get(k as usize).copied().unwrap_or(f64::NEG_INFINITY);
        let u = a * x / b_sq;
        let ln_full = -(b_sq / (a * a)) * ((1.0 + u) * u.ln_1p() - u);
        let ln_simple = -(x / (2.0 * a)) * u.ln_1p();
        let params = Params::new().with("a", a).with("b_sq", b_sq).with("x", x);
        full.push(GridRow::from_logs(params.clone(), ln_lhs, ln_full));
        let row = GridRow::from_logs(params, ln_lhs, ln_simple);
        simple.push(if x > threshold {
            row
        } else {
            row.exclude("outside validity region x <= 4B^2/a")
        });
    }
    let mut set = ReportSet::new("bennett", Params::new().with("a", a).with("b_sq", b_sq));
    set.reports = vec![full.finish(1.0, FLOAT_TOL), simple.finish(1.0, FLOAT_TOL)];
    Ok(set)
}

/// Bennett check for Binomial(n, p) centered at np: a = 1 − p,
/// B² = np(1 − p), and `points` equally spaced x in (4B²/a, n(1 − p)].
/// The range is non-empty only for p < 1/5.
pub fn centered_binomial_bennett(n: usize, p: &BigRational, points: usize) -> Result<ReportSet> {
    let model = PoissonBinomialModel::iid(n, p.clone())?;
    let pf = rational::to_f64(p);
    let a = 1.0 - pf;
    let b_sq = n as f64 * pf * (1.0 - pf);
    let x0 = 4.0 * b_sq / a;
    let x1 = n as f64 * (1.0 - pf);
    if !(x1 > x0) || points == 0 {
        return Err(invalid(
            "p",
            "no grid point satisfies x > 4B^2/a within the support (needs p < 1/5)",
        ));
    }
    let grid: Vec<f64> = (1..=points)
        .map(|j| x0 + (x1 - x0) * j as f64 / points as f64)
        .collect();
    let center = p * BigRational::from_integer(BigInt::from(n));
    let mut set = bennett_hoeffding_check(a, b_sq, &pbt_law(&model), &center, &grid)?;
    set.subject = format!(
        "bennett.binomial(n={n}, p={})",
        rational::format_rational(p)
    );
    Ok(set)
}

/// The colouring premise: the indicators split into classes that are each
/// mutually independent families.
#[derive(Debug, Clone, Serialize)]
pub struct ColoringCheck {
    /// Cycle length on which the classes were enumerated.
    pub n: usize,
    pub classes: Vec<FamilyIndependence>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Residue classes mod 3 when 3 | n, greedy colouring otherwise, each
/// checked for mutual independence by enumeration. Cycles longer than the
/// enumeration limit are checked on the 12-cycle with the same p.
pub fn coloring_check(model: &TwoRunsModel) -> Result<ColoringCheck> {
    let (target, note) = if model.n() <= INDEPENDENCE_ENUM_MAX_N {
        (model.clone(), None)
    } else {
        (
            TwoRunsModel::cycle(12, model.p().clone())?,
            Some(format!(
                "n = {} exceeds the enumeration limit; classes checked on the 12-cycle with the same p",
                model.n()
            )),
        )
    };
    let n = target.n();
    let classes = if n % 3 == 0 {
        residue_classes(n, 3)
    } else {
        greedy_coloring(&two_runs_graph(n)?)
    };
    let indicator = IndicatorModel::TwoRuns(target);
    let checked = classes
        .iter()
        .map(|c| family_independence_check(&indicator, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(ColoringCheck {
        n,
        passed: checked.iter().all(|c| c.passed),
        classes: checked,
        note,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma46Report {
    pub bound: BoundReport,
    pub coloring: ColoringCheck,
}

impl Lemma46Report {
    pub fn passed(&self) -> bool {
        self.bound.pass && self.coloring.passed
    }
}

/// Exact E[W·1(W > x)] against m·exp(−(x/8m) ln(1 + x/(2mλ))) for each x,
/// with m from the cycle's dependency graph, plus the colouring premise.
pub fn lemma46_check(model: &TwoRunsModel, x_grid: &[u64]) -> Result<Lemma46Report> {
    let m = neighborhood_stats(&two_runs_graph(model.n())?).m as f64;
    let lambda = model.lambda_f64();
    let law = two_runs_law_transfer(model);
    let mut bound = BoundReport::new("lemma46.truncated_mean", Direction::Upper);
    for &x in x_grid {
        let above = law.expect_int(|w| {
            if w > x {
                BigInt::from(w)
            } else {
                BigInt::zero()
            }
        });
        let xf = x as f64;
        let ln_shape = m.ln() - (xf / (8.0 * m)) * (xf / (2.0 * m * lambda)).ln_1p();
        let params = model.params().with("m", m).with("x", xf);
        bound.push(GridRow::from_logs(params, ln_rational(&above), ln_shape));
    }
    Ok(Lemma46Report {
        bound: bound.finish(f64::INFINITY, 0.0),
        coloring: coloring_check(model)?,
    })
}

/// Non-negative non-decreasing test functions g.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "arg", rename_all = "snake_case")]
pub enum TestFunction {
    /// The auxiliary function g₁ at the law's λ.
    G1,
    /// w^q
    Monomial(u32),
    /// 1{w ≥ j}
    Indicator(u64),
    /// Tabulated values on 0..len; the last value extends to the right.
    Table(Vec<f64>),
}

impl TestFunction {
    /// Parses `g1`, `mono:Q`, `ind:J` or `table:V0,V1,...`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || {
            invalid(
                "g",
                format!("expected g1, mono:Q, ind:J or table:V,..., got `{s}`"),
            )
        };
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        match kind {
            "g1" if arg.is_empty() => Ok(TestFunction::G1),
            "mono" => arg.parse().map(TestFunction::Monomial).map_err(|_| bad()),
            "ind" => arg.parse().map(TestFunction::Indicator).map_err(|_| bad()),
            "table" => arg
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(TestFunction::Table)
                .map_err(|_| bad()),
            _ => Err(bad()),
        }
    }

    pub fn eval(&self, lambda: f64, w: u64) -> Result<f64> {
        Ok(match self {
            TestFunction::G1 => g1(lambda, w, G1Method::IntegralSeries)?.value,
            TestFunction::Monomial(q) => (w as f64).powi(*q as i32),
            TestFunction::Indicator(j) => f64::from(u8::from(w >= *j)),
            TestFunction::Table(v) => match v.get(w as usize).or(v.last()) {
                Some(&x) => x,
                None => return Err(invalid("g", "empty table")),
            },
        })
    }

    /// Values on 0..=k, rejected unless non-negative and non-decreasing.
    fn values(&self, lambda: f64, k: u64) -> Result<Vec<f64>> {
        let v = (0..=k)
            .map(|w| self.eval(lambda, w))
            .collect::<Result<Vec<_>>>()?;
        let ok = v.iter().all(|&x| x >= 0.0 && x.is_finite()) && v.windows(2).all(|p| p[0] <= p[1]);
        if !ok {
            return Err(Error::NotMonotone { k });
        }
        Ok(v)
    }
}

/// E φ(W ∧ k) for the law of W and for Poi(λ), given φ on 0..=k. Both are
/// finite sums because W ∧ k only takes k + 1 values.
fn truncated_expectations(law: &ExactLaw, poi: &PoissonLaw, phi: &[f64]) -> (f64, f64) {
    let k = phi.len() as u64 - 1;
    let masses = law.masses_f64();
    let mut ew = 0.0;
    let mut ey = 0.0;
    for (w, &f) in phi.iter().enumerate().take(k as usize) {
        ew += f * masses.get(w).copied().unwrap_or(0.0);
        ey += f * poi.pmf(w as u64).prob();
    }
    let top = phi[k as usize];
    ew += top * rational::to_f64(&law.tail_exact(k));
    ey += top * poi.tail(k).prob();
    (ew, ey)
}

/// Both sides of
///
/// * `lemma44`:   E g(W∧k) ≤ C(η_k+1) E g(Y∧k),
/// * `lemma45.i`:   E g₁((W+1)∧k) ≤ C(η_k+1)(1/λ + (k+1−λ)₊²/λ²),
/// * `lemma45.ii`:  E[(W∧k) g₁(W∧k)] ≤ C(η_k+1)(1 + (k−λ)₊²/λ),
/// * `lemma45.iii`: E[(W∧k)² g₁(W∧k)] ≤ C(η_k+1)(λ + (k−λ)₊² + (k−λ)₊³/λ),
///
/// with C fitted. η_k is taken as 0 when k < λ (empty supremum).
pub fn lemma44_45_check(
    law: &ExactLaw,
    lambda: f64,
    k: u64,
    g: &TestFunction,
) -> Result<ReportSet> {
    let poi = PoissonLaw::new(lambda)?;
    let gv = g.values(lambda, k)?;
    let eta = eta_or_zero(law, lambda, k)?;
    let params = Params::new()
        .with("lambda", lambda)
        .with("k", k as f64)
        .with("eta_k", eta);

    let (ew, ey) = truncated_expectations(law, &poi, &gv);
    let mut r44 = BoundReport::new("lemma44", Direction::Upper);
    r44.push(GridRow::new(params.clone(), ew, (eta + 1.0) * ey));
    r44.note(format!("g = {g:?}"));

    let g1v: Vec<f64> = (0..=k)
        .map(|w| g1(lambda, w, G1Method::IntegralSeries).map(|v| v.value))
        .collect::<Result<_>>()?;
    let masses = law.masses_f64();
    let pw = |w: u64| masses.get(w as usize).copied().unwrap_or(0.0);
    // (W+1)∧k = w+1 for w ≤ k−2 and k for W ≥ k−1
    let lhs_i = if k == 0 {
        0.0
    } else {
        (0..k.saturating_sub(1))
            .map(|w| pw(w) * g1v[w as usize + 1])
            .sum::<f64>()
            + g1v[k as usize] * rational::to_f64(&law.tail_exact(k - 1))
    };
    let phi_ii: Vec<f64> = (0..=k).map(|w| w as f64 * g1v[w as usize]).collect();
    let phi_iii: Vec<f64> = (0..=k).map(|w| (w * w) as f64 * g1v[w as usize]).collect();
    let (lhs_ii, _) = truncated_expectations(law, &poi, &phi_ii);
    let (lhs_iii, _) = truncated_expectations(law, &poi, &phi_iii);

    let e1 = (k as f64 + 1.0 - lambda).max(0.0);
    let e = (k as f64 - lambda).max(0.0);
    let shapes = [
        (
            "lemma45.i",
            lhs_i,
            1.0 / lambda + e1 * e1 / (lambda * lambda),
        ),
        ("lemma45.ii", lhs_ii, 1.0 + e * e / lambda),
        ("lemma45.iii", lhs_iii, lambda + e * e + e * e * e / lambda),
    ];
    let mut set = ReportSet::new(format!("lemma44_45.{}", law.model()), params.clone());
    set.reports.push(r44.finish(f64::INFINITY, 0.0));
    for (id, lhs, shape) in shapes {
        let mut r = BoundReport::new(id, Direction::Upper);
        r.push(GridRow::new(params.clone(), lhs, (eta + 1.0) * shape));
        set.reports.push(r.finish(f64::INFINITY, 0.0));
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn local_dependence_rhs_at_zero_deviation() {
        let r = thm21_rhs(3, 0.1, 0.01, 4.0, 12.0, 4).unwrap();
        assert_eq!(r.xi, 0.0);
        assert!((r.local - 9.0 * (0.1 + 0.04)).abs() < 1e-15);
        assert!((r.tail - 0.25 * 9.0 * (-4f64).exp()).abs() < 1e-15);
        assert!(thm21_rhs(3, 0.1, 0.01, 4.0, 12.0, 3).is_err());
    }

    #[test]
    fn coupling_rhs_shapes() {
        assert!((thm23_rhs(0.2, 0.1, 1.0, 1).unwrap() - 0.3).abs() < 1e-15);
        // ξ = 2 at λ = 4, k = 8
        assert!((thm23_rhs(0.0, 0.05, 4.0, 8).unwrap() - 0.2 * 5.0).abs() < 1e-15);
    }

    #[test]
    fn eta_is_monotone_and_checks_domain() {
        let law = matching_law(&MatchingModel::new(7).unwrap());
        let e: Vec<f64> = (1..=7)
            .map(|k| eta_k(&law, 1.0, k).unwrap().value)
            .collect();
        assert!(e.windows(2).all(|p| p[0] <= p[1]));
        assert!(eta_k(&law, 1.5, 1).is_err());
    }

    #[test]
    fn test_function_parsing() {
        assert_eq!(TestFunction::parse("g1").unwrap(), TestFunction::G1);
        assert_eq!(
            TestFunction::parse("mono:2").unwrap(),
            TestFunction::Monomial(2)
        );
        assert_eq!(
            TestFunction::parse("ind:3").unwrap(),
            TestFunction::Indicator(3)
        );
        assert!(TestFunction::parse("sin").is_err());
        let law = matching_law(&MatchingModel::new(5).unwrap());
        let g = TestFunction::Table(vec![1.0, 0.0]);
        assert!(matches!(
            lemma44_45_check(&law, 1.0, 2, &g),
            Err(Error::NotMonotone { k: 2 })
        ));
    }

    #[test]
    fn constant_test_function() {
        let law = matching_law(&MatchingModel::new(6).unwrap());
        let set = lemma44_45_check(&law, 1.0, 3, &TestFunction::Monomial(0)).unwrap();
        let r = set.get("lemma44").unwrap();
        // E 1 = 1 on both sides
        assert!((r.rows[0].lhs - 1.0).abs() < 1e-15);
        assert!(r.rows[0].ratio <= 1.0);
    }

    #[test]
    fn bennett_small_binomial() {
        let set = centered_binomial_bennett(20, &q(1, 10), 8).unwrap();
        assert!(set.passed());
        assert_eq!(set.get("bennett.simplified").unwrap().admissible_rows(), 8);
        assert!(centered_binomial_bennett(20, &q(1, 2), 8).is_err());
    }

    #[test]
    fn ratio_rejects_left_tail() {
        let m = RatioModel::Pbt(PoissonBinomialModel::iid(100, q(1, 20)).unwrap());
        assert!(matches!(
            ratio_experiment(&m, 4..=10, 0.5),
            Err(Error::RightTailOnly { .. })
        ));
        let r = ratio_experiment(&m, 5..=10, 0.5).unwrap();
        assert!(r.fitted_c.unwrap().is_finite());
    }
}
