//! Dependency neighbourhoods B_i ∋ i with X_i independent of {X_j : j ∉ B_i},
//! the neighbourhood constant m, and exact independence checks.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::models::{pbt_weights, PoissonBinomialModel, TwoRunsModel};

/// Largest index set whose joint law is enumerated.
pub const INDEPENDENCE_ENUM_MAX_N: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DependencyGraph {
    n: usize,
    /// Sorted neighbourhoods; `neighborhoods[i]` always contains i.
    neighborhoods: Vec<Vec<usize>>,
}

impl DependencyGraph {
    pub fn new(neighborhoods: Vec<Vec<usize>>) -> Result<Self> {
        let n = neighborhoods.len();
        if n == 0 {
            return Err(invalid("graph", "empty index set"));
        }
        let mut sorted = Vec::with_capacity(n);
        for (i, mut b) in neighborhoods.into_iter().enumerate() {
            b.sort_unstable();
            b.dedup();
            if b.binary_search(&i).is_err() {
                return Err(invalid(
                    "graph",
                    format!("index {i} missing from its own neighborhood"),
                ));
            }
            if let Some(&j) = b.iter().find(|&&j| j >= n) {
                return Err(invalid(
                    "graph",
                    format!("neighbor {j} of {i} is outside 0..{n}"),
                ));
            }
            sorted.push(b);
        }
        Ok(DependencyGraph {
            n,
            neighborhoods: sorted,
        })
    }

    /// B_i = {i}: the graph of fully independent indicators.
    pub fn singletons(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| vec![i]).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn neighborhood(&self, i: usize) -> &[usize] {
        &self.neighborhoods[i]
    }

    /// The same graph with index i renamed perm[i].
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(invalid("perm", "length differs from the index set"));
        }
        let mut out = vec![Vec::new(); self.n];
        for (i, b) in self.neighborhoods.iter().enumerate() {
            out[perm[i]] = b.iter().map(|&j| perm[j]).collect();
        }
        Self::new(out)
    }
}

/// Cyclic neighbourhoods {i−1, i, i+1} of the 2-runs indicators.
pub fn two_runs_graph(n: usize) -> Result<DependencyGraph> {
    if n < 5 {
        return Err(invalid(
            "n",
            format!("needs n >= 5 so neighborhoods do not wrap onto each other, got {n}"),
        ));
    }
    DependencyGraph::new(
        (0..n)
            .map(|i| vec![(i + n - 1) % n, i, (i + 1) % n])
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NeighborhoodStats {
    /// max_i |B_i|
    pub m_out: usize,
    /// max_j |{i : j ∈ B_i}|
    pub m_in: usize,
    /// max(m_out, m_in), the single m bounding both.
    pub m: usize,
}

pub fn neighborhood_stats(graph: &DependencyGraph) -> NeighborhoodStats {
    let m_out = graph.neighborhoods.iter().map(Vec::len).max().unwrap_or(0);
    let mut indeg = vec![0usize; graph.n];
    for b in &graph.neighborhoods {
        for &j in b {
            indeg[j] += 1;
        }
    }
    let m_in = indeg.into_iter().max().unwrap_or(0);
    NeighborhoodStats {
        m_out,
        m_in,
        m: m_out.max(m_in),
    }
}

/// Families of indicators whose joint law the checker can obtain.
#[derive(Debug, Clone, PartialEq)]
pub enum IndicatorModel {
    Pbt(PoissonBinomialModel),
    TwoRuns(TwoRunsModel),
}

impl IndicatorModel {
    pub fn n(&self) -> usize {
        match self {
            IndicatorModel::Pbt(m) => m.n(),
            IndicatorModel::TwoRuns(m) => m.n(),
        }
    }
}

/// Exact joint law of the indicator vector as integer weights over a
/// common denominator, keyed by the bit pattern of (X_0, .., X_{n−1}).
struct IndicatorLaw {
    weights: HashMap<u32, BigUint>,
    denominator: BigUint,
}

impl IndicatorLaw {
    fn enumerate(model: &IndicatorModel) -> Result<Self> {
        let n = model.n();
        if n > INDEPENDENCE_ENUM_MAX_N {
            return Err(Error::SizeLimit {
                what: "independence enumeration n",
                value: n,
                limit: INDEPENDENCE_ENUM_MAX_N,
            });
        }
        let mut weights: HashMap<u32, BigUint> = HashMap::new();
        let denominator;
        match model {
            IndicatorModel::TwoRuns(m) => {
                let (a, q, b) = pbt_weights(m.p());
                let pa: Vec<BigUint> = (0..=n).map(|k| num_traits::pow(a.clone(), k)).collect();
                let pq: Vec<BigUint> = (0..=n).map(|k| num_traits::pow(q.clone(), k)).collect();
                for xi in 0u32..(1 << n) {
                    let rotated = (xi >> 1) | ((xi & 1) << (n - 1));
                    let x = xi & rotated;
                    let ones = xi.count_ones() as usize;
                    *weights.entry(x).or_default() += &pa[ones] * &pq[n - ones];
                }
                denominator = num_traits::pow(b, n);
            }
            IndicatorModel::Pbt(m) => {
                let mut den = BigUint::one();
                weights.insert(0, BigUint::one());
                for (i, p) in m.probs().iter().enumerate() {
                    let (a, q, b) = pbt_weights(p);
                    let mut next: HashMap<u32, BigUint> = HashMap::new();
                    for (x, w) in &weights {
                        if !q.is_zero() {
                            *next.entry(*x).or_default() += w * &q;
                        }
                        if !a.is_zero() {
                            *next.entry(x | 1 << i).or_default() += w * &a;
                        }
                    }
                    weights = next;
                    den *= b;
                }
                denominator = den;
            }
        }
        Ok(IndicatorLaw {
            weights,
            denominator,
        })
    }

    /// Marginal weights of the coordinates in `mask`.
    fn marginal(&self, mask: u32) -> HashMap<u32, BigUint> {
        let mut out: HashMap<u32, BigUint> = HashMap::new();
        for (x, w) in &self.weights {
            *out.entry(x & mask).or_default() += w;
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IndependenceRow {
    pub i: usize,
    /// Assignments x_S of the indicators outside B_i that were compared.
    pub assignments: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct IndependenceReport {
    pub n: usize,
    pub m: usize,
    pub method: &'static str,
    pub rows: Vec<IndependenceRow>,
    pub passed: bool,
}

/// For every i checks P(X_i = 1, X_S = x_S) = P(X_i = 1) P(X_S = x_S) over
/// all x_S, S = J \ B_i, in exact arithmetic on the enumerated joint law.
/// Refuses models too large to enumerate.
pub fn independence_check(
    model: &IndicatorModel,
    graph: &DependencyGraph,
) -> Result<IndependenceReport> {
    let n = model.n();
    if graph.n() != n {
        return Err(invalid(
            "graph",
            format!("has {} indices but the model has {n}", graph.n()),
        ));
    }
    let law = IndicatorLaw::enumerate(model)?;
    let full = (1u32 << n) - 1;
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let bit = 1u32 << i;
        let b_mask: u32 = graph.neighborhood(i).iter().map(|&j| 1u32 << j).sum();
        let s_mask = full & !b_mask;
        let p_i: BigUint = law
            .weights
            .iter()
            .filter(|(x, _)| *x & bit != 0)
            .map(|(_, w)| w)
            .sum();
        let joint = law.marginal(s_mask | bit);
        let outside = law.marginal(s_mask);
        let mut failures = 0;
        for (xs, w_s) in &outside {
            let w_joint = joint.get(&(xs | bit)).cloned().unwrap_or_default();
            if w_joint * &law.denominator != &p_i * w_s {
                failures += 1;
            }
        }
        rows.push(IndependenceRow {
            i,
            assignments: outside.len(),
            failures,
        });
    }
    Ok(IndependenceReport {
        n,
        m: neighborhood_stats(graph).m,
        method: "enumeration",
        passed: rows.iter().all(|r| r.failures == 0),
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyIndependence {
    pub indices: Vec<usize>,
    pub assignments: usize,
    pub failures: usize,
    pub passed: bool,
}

/// Checks that {X_i : i ∈ indices} are mutually independent:
/// P(X_C = x) = Π_{i ∈ C} P(X_i = x_i) for every x ∈ {0, 1}^C.
pub fn family_independence_check(
    model: &IndicatorModel,
    indices: &[usize],
) -> Result<FamilyIndependence> {
    let n = model.n();
    if let Some(&j) = indices.iter().find(|&&j| j >= n) {
        return Err(invalid("indices", format!("{j} is outside 0..{n}")));
    }
    let law = IndicatorLaw::enumerate(model)?;
    let mask: u32 = indices.iter().map(|&j| 1u32 << j).sum();
    let joint = law.marginal(mask);
    let singles: Vec<(BigUint, BigUint)> = indices
        .iter()
        .map(|&j| {
            let m = law.marginal(1 << j);
            let one = m.get(&(1 << j)).cloned().unwrap_or_default();
            let zero = m.get(&0).cloned().unwrap_or_default();
            (zero, one)
        })
        .collect();
    let c = indices.len();
    let scale = num_traits::pow(law.denominator.clone(), c.saturating_sub(1));
    let mut failures = 0;
    for pattern in 0u32..(1 << c) {
        let mut x = 0u32;
        let mut product = BigUint::one();
        for (k, &j) in indices.iter().enumerate() {
            if pattern >> k & 1 == 1 {
                x |= 1 << j;
                product *= &singles[k].1;
            } else {
                product *= &singles[k].0;
            }
        }
        let w = joint.get(&x).cloned().unwrap_or_default();
        if w * &scale != product {
            failures += 1;
        }
    }
    Ok(FamilyIndependence {
        indices: indices.to_vec(),
        assignments: 1 << c,
        failures,
        passed: failures == 0,
    })
}

/// Greedy colouring in index order: i and j share a class only when
/// neither lies in the other's neighbourhood.
pub fn greedy_coloring(graph: &DependencyGraph) -> Vec<Vec<usize>> {
    let n = graph.n();
    let conflicts = |i: usize, j: usize| {
        graph.neighborhood(i).contains(&j) || graph.neighborhood(j).contains(&i)
    };
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let c = (0..classes.len())
            .find(|&c| classes[c].iter().all(|&j| !conflicts(i, j)))
            .unwrap_or_else(|| {
                classes.push(Vec::new());
                classes.len() - 1
            });
        classes[c].push(i);
    }
    classes
}

/// Classes {i : i ≡ r mod m}, r = 0..m−1.
pub fn residue_classes(n: usize, m: usize) -> Vec<Vec<usize>> {
    (0..m).map(|r| (r..n).step_by(m).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn runs(n: usize) -> IndicatorModel {
        IndicatorModel::TwoRuns(
            TwoRunsModel::cycle(n, BigRational::new(1.into(), 4.into())).unwrap(),
        )
    }

    #[test]
    fn stats() {
        let g = DependencyGraph::singletons(1).unwrap();
        assert_eq!(neighborhood_stats(&g).m, 1);
        let star = DependencyGraph::new(
            (0..5)
                .map(|i| if i == 0 { vec![0] } else { vec![0, i] })
                .collect(),
        )
        .unwrap();
        let s = neighborhood_stats(&star);
        assert_eq!((s.m_out, s.m_in, s.m), (2, 5, 5));
    }

    #[test]
    fn validation() {
        assert!(DependencyGraph::new(vec![]).is_err());
        assert!(DependencyGraph::new(vec![vec![1], vec![1]]).is_err());
        assert!(DependencyGraph::new(vec![vec![0, 2]]).is_err());
        assert!(two_runs_graph(4).is_err());
        assert_eq!(two_runs_graph(5).unwrap().neighborhood(0), &[0, 1, 4]);
    }

    #[test]
    fn two_runs_neighborhoods_are_exact() {
        let m = runs(8);
        assert!(
            independence_check(&m, &two_runs_graph(8).unwrap())
                .unwrap()
                .passed
        );
        let truncated = independence_check(&m, &DependencyGraph::singletons(8).unwrap()).unwrap();
        assert!(!truncated.passed);
    }

    #[test]
    fn refuses_large_models() {
        let m = runs(21);
        let r = independence_check(&m, &two_runs_graph(21).unwrap());
        assert!(matches!(r, Err(Error::SizeLimit { .. })));
    }

    #[test]
    fn coloring_of_cycle() {
        let g = two_runs_graph(12).unwrap();
        assert_eq!(greedy_coloring(&g), residue_classes(12, 2));
        assert_eq!(greedy_coloring(&two_runs_graph(7).unwrap()).len(), 3);
        let m = runs(12);
        for class in residue_classes(12, 3).iter().chain(&greedy_coloring(&g)) {
            assert!(family_independence_check(&m, class).unwrap().passed);
        }
    }

    #[test]
    fn adjacent_runs_are_dependent() {
        let m = runs(9);
        assert!(family_independence_check(&m, &[0, 3, 6]).unwrap().passed);
        assert!(!family_independence_check(&m, &[0, 1]).unwrap().passed);
    }
}
