//! Size-bias couplings (W, W^s) with Δ = W + 1 − W^s ∈ {−1, 0, 1}.
//!
//! W^s has the W-size-biased law when E W f(W) = λ E f(W^s) for all f.
//! Exact joint laws of (W, Δ) are built for independent indicators (by
//! leave-one-out deconvolution) and for fixed points of a permutation (by
//! enumerating every permutation and every choice of the biased index).

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::ser::{SerializeStruct, Serializer};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::models::{pbt_law, ExactLaw, MatchingModel, PoissonBinomialModel};
use crate::poisson::{PoissonLaw, FLOAT_TOL};
use crate::rational::{self, factorial, format_rational};
use crate::report::{BoundReport, Direction, GridRow, Params};

/// Largest n for exhaustive enumeration of the matching coupling.
pub const MATCHING_ENUM_MAX_N: usize = 9;
/// Environment variable capping the sampler's worker threads.
pub const WORKERS_ENV: &str = "POISSON_MD_WORKERS";
/// Sampling work is split into this many substreams whatever the thread
/// count, so results do not depend on the machine.
const SAMPLE_CHUNKS: u64 = 64;
/// Conditional estimates from fewer draws than this are not used when
/// fitting δ₁, δ₂ from samples.
pub const MIN_CELL_COUNT: u64 = 1000;

/// Exact joint law of (W, Δ) on 0..=w_max × {−1, 0, 1}.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaLaw {
    model: String,
    params: Params,
    lambda: BigRational,
    /// masses[w][d + 1]
    masses: Vec<[BigRational; 3]>,
    analytic: Option<(BigRational, BigRational)>,
}

impl DeltaLaw {
    pub fn new(
        model: impl Into<String>,
        params: Params,
        lambda: BigRational,
        masses: Vec<[BigRational; 3]>,
    ) -> Result<Self> {
        if masses.is_empty() {
            return Err(invalid("masses", "empty support"));
        }
        if masses.iter().flatten().any(|m| m.is_negative()) {
            return Err(invalid("masses", "negative mass"));
        }
        let total: BigRational = masses.iter().flatten().sum();
        if !total.is_one() {
            return Err(invalid("masses", "do not sum to one"));
        }
        Ok(DeltaLaw {
            model: model.into(),
            params,
            lambda,
            masses,
            analytic: None,
        })
    }

    fn with_analytic(mut self, delta1: BigRational, delta2: BigRational) -> Self {
        self.analytic = Some((delta1, delta2));
        self
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn lambda(&self) -> &BigRational {
        &self.lambda
    }

    pub fn w_max(&self) -> u64 {
        self.masses.len() as u64 - 1
    }

    /// P(W = w, Δ = d).
    pub fn mass(&self, w: u64, d: i8) -> BigRational {
        assert!((-1..=1).contains(&d), "delta outside {{-1, 0, 1}}");
        self.masses
            .get(w as usize)
            .map(|row| row[(d + 1) as usize].clone())
            .unwrap_or_else(BigRational::zero)
    }

    fn w_mass(&self, w: usize) -> BigRational {
        self.masses[w].iter().sum()
    }

    /// Marginal law of W.
    pub fn w_law(&self) -> ExactLaw {
        let m: Vec<BigRational> = (0..self.masses.len()).map(|w| self.w_mass(w)).collect();
        ExactLaw::from_rationals(self.model.clone(), self.params.clone(), &m)
            .expect("marginal of a normalized law")
    }

    /// Law of W^s = W + 1 − Δ on 0..=w_max+2.
    pub fn ws_law(&self) -> ExactLaw {
        let mut m = vec![BigRational::zero(); self.masses.len() + 2];
        for (w, row) in self.masses.iter().enumerate() {
            for (i, mass) in row.iter().enumerate() {
                // v = w + 1 − d with d = i − 1
                m[w + 2 - i] += mass;
            }
        }
        ExactLaw::from_rationals(
            format!("{}_size_biased", self.model),
            self.params.clone(),
            &m,
        )
        .expect("pushforward of a normalized law")
    }

    /// P(Δ = d).
    pub fn prob_delta(&self, d: i8) -> BigRational {
        (0..=self.w_max()).map(|w| self.mass(w, d)).sum()
    }

    /// E|W + 1 − W^s| = P(Δ ≠ 0).
    pub fn e_abs_delta(&self) -> BigRational {
        self.prob_delta(-1) + self.prob_delta(1)
    }

    /// P(Δ = d | W = w), `None` when P(W = w) = 0.
    pub fn conditional(&self, d: i8, w: u64) -> Option<BigRational> {
        let pw = self.w_mass(w as usize);
        if pw.is_zero() {
            return None;
        }
        Some(self.mass(w, d) / pw)
    }

    /// Smallest δ₁ with P(Δ = −1 | W) ≤ δ₁.
    pub fn fitted_delta1(&self) -> BigRational {
        (0..=self.w_max())
            .filter_map(|w| self.conditional(-1, w))
            .max()
            .unwrap_or_else(BigRational::zero)
    }

    /// Smallest δ₂ with P(Δ = 1 | W) ≤ δ₂ W; `None` when no finite δ₂
    /// works because P(Δ = 1, W = 0) > 0.
    pub fn fitted_delta2(&self) -> Option<BigRational> {
        if !self.mass(0, 1).is_zero() {
            return None;
        }
        Some(
            (1..=self.w_max())
                .filter_map(|w| {
                    self.conditional(1, w)
                        .map(|c| c / BigRational::from_integer(w.into()))
                })
                .max()
                .unwrap_or_else(BigRational::zero),
        )
    }

    /// The constants (δ₁, δ₂) the model's own analysis gives, when known.
    pub fn analytic_deltas(&self) -> Option<&(BigRational, BigRational)> {
        self.analytic.as_ref()
    }
}

impl Serialize for DeltaLaw {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Row {
            w: u64,
            minus: String,
            zero: String,
            plus: String,
        }
        let rows: Vec<Row> = self
            .masses
            .iter()
            .enumerate()
            .map(|(w, r)| Row {
                w: w as u64,
                minus: format_rational(&r[0]),
                zero: format_rational(&r[1]),
                plus: format_rational(&r[2]),
            })
            .collect();
        let e_abs = self.e_abs_delta();
        let d1 = self.fitted_delta1();
        let d2 = self.fitted_delta2();
        let mut st = s.serialize_struct("DeltaLaw", 11)?;
        st.serialize_field("model", &self.model)?;
        st.serialize_field("params", &self.params)?;
        st.serialize_field("lambda", &format_rational(&self.lambda))?;
        st.serialize_field("support", &[0, self.w_max()])?;
        st.serialize_field("masses", &rows)?;
        st.serialize_field("e_abs_diff", &rational::to_f64(&e_abs))?;
        st.serialize_field("e_abs_diff_exact", &format_rational(&e_abs))?;
        st.serialize_field("delta1_fitted", &format_rational(&d1))?;
        st.serialize_field("delta2_fitted", &d2.as_ref().map(format_rational))?;
        st.serialize_field(
            "delta1_analytic",
            &self.analytic.as_ref().map(|a| format_rational(&a.0)),
        )?;
        st.serialize_field(
            "delta2_analytic",
            &self.analytic.as_ref().map(|a| format_rational(&a.1)),
        )?;
        st.end()
    }
}

/// One monomial degree of the size-bias identity E W^{q+1} = λ E (W^s)^q.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityRow {
    pub q: u32,
    pub lhs: String,
    pub rhs: String,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub lambda: String,
    pub rows: Vec<IdentityRow>,
    pub passed: bool,
    /// Lowest degree at which the identity fails.
    pub failing_degree: Option<u32>,
}

/// Checks E W f(W) = λ E f(W^s) for f(w) = w^q, q = 0..=test_degree, in
/// exact arithmetic with λ = E W.
pub fn size_bias_identity_check(
    law_w: &ExactLaw,
    law_ws: &ExactLaw,
    test_degree: u32,
) -> IdentityReport {
    let lambda = law_w.mean();
    let rows: Vec<IdentityRow> = (0..=test_degree)
        .map(|q| {
            let lhs = law_w.moment(q + 1);
            let rhs = &lambda * law_ws.moment(q);
            IdentityRow {
                q,
                holds: lhs == rhs,
                lhs: format_rational(&lhs),
                rhs: format_rational(&rhs),
            }
        })
        .collect();
    let failing_degree = rows.iter().find(|r| !r.holds).map(|r| r.q);
    IdentityReport {
        lambda: format_rational(&lambda),
        passed: failing_degree.is_none(),
        failing_degree,
        rows,
    }
}

/// W^s = W − X_I + 1 with P(I = i) = p_i/λ independent of the X's, so
/// Δ = X_I and P(W = w, Δ = 1) = Σ_i (p_i/λ) p_i P(W − X_i = w − 1).
pub fn pbt_coupling_delta_law(model: &PoissonBinomialModel) -> DeltaLaw {
    let full = pbt_law(model);
    let lambda = model.lambda();
    let n = model.n();
    let mut distinct: Vec<(BigRational, usize)> = Vec::new();
    for p in model.probs() {
        match distinct.iter_mut().find(|(q, _)| q == p) {
            Some((_, c)) => *c += 1,
            None => distinct.push((p.clone(), 1)),
        }
    }
    let mut plus = vec![BigRational::zero(); n + 1];
    for (p, count) in &distinct {
        if p.is_zero() {
            continue;
        }
        let (_, _, b) = crate::models::pbt_weights(p);
        let rest = crate::models::pbt_leave_one_out(full.numerators(), p);
        let rest_den = BigInt::from(full.denominator() / &b);
        let weight = p * p * BigRational::from_integer((*count).into()) / &lambda;
        for (v, num) in rest.iter().enumerate() {
            if !num.is_zero() {
                plus[v + 1] += &weight * BigRational::new(num.clone().into(), rest_den.clone());
            }
        }
    }
    let masses = plus
        .into_iter()
        .enumerate()
        .map(|(w, pl)| [BigRational::zero(), full.mass(w as u64) - &pl, pl])
        .collect();
    let delta2 = model.p_tilde() / &lambda;
    DeltaLaw::new("pbt", model.params(), lambda, masses)
        .expect("coupling marginal equals the exact law")
        .with_analytic(BigRational::zero(), delta2)
}

/// π^s from π: π^s(I) = I, π^s(π⁻¹(I)) = π(I), otherwise π^s(j) = π(j).
fn pi_s_into(pi: &[usize], inv: &[usize], i: usize, out: &mut Vec<usize>) {
    out.clear();
    out.extend_from_slice(pi);
    // write the second case first so that when π(I) = I the first wins
    out[inv[i]] = pi[i];
    out[i] = i;
}

fn fixed_points(pi: &[usize]) -> usize {
    pi.iter().enumerate().filter(|(j, &v)| *j == v).count()
}

/// Counts of (W, Δ) over all n!·n equally likely pairs (π, I).
fn matching_coupling_counts(n: usize) -> Result<Vec<[u64; 3]>> {
    let mut counts = vec![[0u64; 3]; n + 1];
    let mut pi: Vec<usize> = (0..n).collect();
    let mut inv = vec![0usize; n];
    let mut buf = Vec::with_capacity(n);
    let mut c = vec![0usize; n];
    let mut visit = |pi: &[usize]| -> Result<()> {
        for (j, &v) in pi.iter().enumerate() {
            inv[v] = j;
        }
        let w = fixed_points(pi);
        for i in 0..n {
            pi_s_into(pi, &inv, i, &mut buf);
            let d = w as i64 + 1 - fixed_points(&buf) as i64;
            if !(-1..=1).contains(&d) {
                return Err(Error::Inconsistent(format!(
                    "coupling produced delta = {d} for n = {n}"
                )));
            }
            counts[w][(d + 1) as usize] += 1;
        }
        Ok(())
    };
    // Heap's algorithm
    visit(&pi)?;
    let mut k = 1;
    while k < n {
        if c[k] < k {
            if k % 2 == 0 {
                pi.swap(0, k);
            } else {
                pi.swap(c[k], k);
            }
            visit(&pi)?;
            c[k] += 1;
            k = 1;
        } else {
            c[k] = 0;
            k += 1;
        }
    }
    Ok(counts)
}

/// Exact joint law of (W, Δ) for the matching coupling by enumeration of
/// every permutation and every I; n ≤ 9.
pub fn matching_coupling_enumerate(model: &MatchingModel) -> Result<DeltaLaw> {
    let n = model.n();
    if n > MATCHING_ENUM_MAX_N {
        return Err(Error::SizeLimit {
            what: "matching enumeration n",
            value: n,
            limit: MATCHING_ENUM_MAX_N,
        });
    }
    let counts = matching_coupling_counts(n)?;
    let total = BigInt::from(factorial(n as u64) * BigUint::from(n));
    let masses = counts
        .iter()
        .map(|row| row.map(|c| BigRational::new(c.into(), total.clone())))
        .collect();
    let nn = BigInt::from(n);
    Ok(
        DeltaLaw::new("matching", model.params(), BigRational::one(), masses)?.with_analytic(
            BigRational::new(2.into(), nn.clone()),
            BigRational::new(1.into(), nn),
        ),
    )
}

/// Seeded source of independent random substreams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RngStream {
    seed: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Generator for substream `index`; distinct indices never overlap.
    pub fn substream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}

/// Worker count from the environment cap, else rayon's default.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

/// Monte Carlo estimates for a size-bias coupling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingStats {
    pub model: String,
    pub n: usize,
    pub lambda: f64,
    pub seed: u64,
    pub samples: u64,
    pub e_abs_diff: f64,
    pub e_abs_diff_se: f64,
    pub p_delta_plus: f64,
    pub p_delta_plus_se: f64,
    pub p_delta_minus: f64,
    pub p_delta_minus_se: f64,
    /// max over well-sampled w of P̂(Δ = −1 | W = w).
    pub delta1: f64,
    pub delta1_se: f64,
    /// max over well-sampled w ≥ 1 of P̂(Δ = 1 | W = w)/w.
    pub delta2: f64,
    pub delta2_se: f64,
    /// Draw counts of (W = w, Δ = −1, 0, 1).
    pub counts: Vec<[u64; 3]>,
}

fn proportion(hits: u64, total: u64) -> (f64, f64) {
    if total == 0 {
        return (0.0, 0.0);
    }
    let p = hits as f64 / total as f64;
    (p, (p * (1.0 - p) / total as f64).sqrt())
}

/// Samples π by Fisher–Yates and I uniformly, builds π^s by the
/// three-case rule, and estimates E|Δ|, δ₁, δ₂ with standard errors.
///
/// The draws are split into a fixed number of substreams of `rng`, run in
/// parallel and merged by integer count addition, so the output is
/// bit-identical for a given seed on any number of threads.
pub fn matching_coupling_sample(
    model: &MatchingModel,
    rng: &RngStream,
    n_samples: u64,
) -> Result<CouplingStats> {
    if n_samples == 0 {
        return Err(invalid("n_samples", "must be >= 1"));
    }
    let n = model.n();
    let chunk = |index: u64| -> Vec<[u64; 3]> {
        let draws = n_samples / SAMPLE_CHUNKS + u64::from(index < n_samples % SAMPLE_CHUNKS);
        let mut gen = rng.substream(index);
        let mut counts = vec![[0u64; 3]; n + 1];
        let mut pi: Vec<usize> = (0..n).collect();
        let mut inv = vec![0usize; n];
        let mut buf = Vec::with_capacity(n);
        for _ in 0..draws {
            pi.shuffle(&mut gen);
            let i = gen.random_range(0..n);
            for (j, &v) in pi.iter().enumerate() {
                inv[v] = j;
            }
            let w = fixed_points(&pi);
            pi_s_into(&pi, &inv, i, &mut buf);
            let d = w as i64 + 1 - fixed_points(&buf) as i64;
            counts[w][(d + 1) as usize] += 1;
        }
        counts
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| Error::Inconsistent(format!("thread pool: {e}")))?;
    let parts: Vec<Vec<[u64; 3]>> =
        pool.install(|| (0..SAMPLE_CHUNKS).into_par_iter().map(chunk).collect());
    let mut counts = vec![[0u64; 3]; n + 1];
    for part in &parts {
        for (acc, row) in counts.iter_mut().zip(part) {
            for d in 0..3 {
                acc[d] += row[d];
            }
        }
    }
    Ok(stats_from_counts(model, rng.seed(), n_samples, counts))
}

fn stats_from_counts(
    model: &MatchingModel,
    seed: u64,
    samples: u64,
    counts: Vec<[u64; 3]>,
) -> CouplingStats {
    let minus: u64 = counts.iter().map(|r| r[0]).sum();
    let plus: u64 = counts.iter().map(|r| r[2]).sum();
    let (e_abs_diff, e_abs_diff_se) = proportion(minus + plus, samples);
    let (p_delta_plus, p_delta_plus_se) = proportion(plus, samples);
    let (p_delta_minus, p_delta_minus_se) = proportion(minus, samples);
    let mut delta1 = (0.0, 0.0);
    let mut delta2 = (0.0, 0.0);
    for (w, row) in counts.iter().enumerate() {
        let cell: u64 = row.iter().sum();
        if cell < MIN_CELL_COUNT {
            continue;
        }
        let d1 = proportion(row[0], cell);
        if d1.0 > delta1.0 {
            delta1 = d1;
        }
        if w >= 1 {
            let (p, se) = proportion(row[2], cell);
            let d2 = (p / w as f64, se / w as f64);
            if d2.0 > delta2.0 {
                delta2 = d2;
            }
        }
    }
    CouplingStats {
        model: "matching".into(),
        n: model.n(),
        lambda: model.lambda(),
        seed,
        samples,
        e_abs_diff,
        e_abs_diff_se,
        p_delta_plus,
        p_delta_plus_se,
        p_delta_minus,
        p_delta_minus_se,
        delta1: delta1.0,
        delta1_se: delta1.1,
        delta2: delta2.0,
        delta2_se: delta2.1,
        counts,
    }
}

/// TV(law, Poi(λ)) = ½ Σ_w |P(W = w) − P(Y = w)|, with the Poisson mass
/// beyond the support of W added in closed form.
pub fn tv_distance_poisson(law: &ExactLaw, lambda: f64) -> Result<f64> {
    let poi = PoissonLaw::new(lambda)?;
    let body: f64 = law
        .masses_f64()
        .iter()
        .enumerate()
        .map(|(w, &p)| (p - poi.pmf(w as u64).prob()).abs())
        .sum();
    Ok(0.5 * (body + poi.tail(law.w_max() + 1).prob()))
}

/// TV(L(W), Poi(λ)) ≤ (1 − e^{−λ}) E|W + 1 − W^s|.
pub fn verify_tv_bound(delta: &DeltaLaw) -> Result<BoundReport> {
    let lambda = rational::to_f64(delta.lambda());
    let tv = tv_distance_poisson(&delta.w_law(), lambda)?;
    let e_abs = rational::to_f64(&delta.e_abs_delta());
    let rhs = -(-lambda).exp_m1() * e_abs;
    let mut report = BoundReport::new("tv_bound", Direction::Upper);
    let params = {
        let mut p = delta.params.clone();
        p.0.push(("e_abs_diff".into(), e_abs));
        p
    };
    report.push(GridRow::new(params, tv, rhs));
    Ok(report.finish(1.0, FLOAT_TOL))
}
