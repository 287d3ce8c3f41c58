//! Revealed-preference relations on a finite carrier of bundles.
//!
//! The relations proper are defined on all of `R^m_+`, but every query only
//! compares finitely many named bundles, so we materialize exactly those.
//!
//! Direct relations for a dataset `{(p^k, x^k)}`:
//!
//! * weak `a → b` iff `a = b`, or `a ≥ x^k` and `p^k·x^k ≥ p^k·b` for some `k`;
//! * strict `a → b` iff `a ≥ x^k` and `p^k·x^k > p^k·b` for some `k`, or
//!   `a ≫ x′` for some `x′` weakly revealed preferred to `b`.
//!
//! The existential over `x′` in the strict case collapses: `a ≫ x′ ≥ x^k`
//! gives `a ≫ x^k`, and `x′ = b` is always allowed, so the clause is
//! `(∃k: a ≫ x^k, p^k·x^k ≥ p^k·b)` or `a ≫ b`. Every strict edge is also
//! entered as a weak edge so that `S ⊆ W` holds on the nose.

use std::collections::VecDeque;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::IndividualDataset;
use crate::numerics::{RVector, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RevprefError {
    #[error("carrier label {0:?} used twice")]
    DuplicateLabel(String),
    #[error("bundle {label:?} has dimension {found}, expected {expected}")]
    Dimension {
        label: String,
        expected: usize,
        found: usize,
    },
    #[error("carrier does not contain observed bundle {0}")]
    MissingObserved(usize),
    #[error("weights sum to {0}, not 1")]
    WeightSum(Rational),
    #[error("negative weight {0}")]
    NegativeWeight(Rational),
    #[error("convex combination {found} does not reproduce {expected}")]
    Combination { expected: RVector, found: RVector },
}

/// Label of observation `k` (0-based) in carriers built here: `x1, x2, …`.
pub fn observation_label(k: usize) -> String {
    format!("x{}", k + 1)
}

/// Ordered, uniquely labeled bundles.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Carrier {
    labels: Vec<String>,
    bundles: Vec<RVector>,
}

impl Carrier {
    pub fn new() -> Self {
        Self::default()
    }

    /// Carrier holding exactly the observed bundles, in order.
    pub fn observed(d: &IndividualDataset) -> Self {
        Carrier {
            labels: (0..d.len()).map(observation_label).collect(),
            bundles: d.observations().iter().map(|o| o.bundle.clone()).collect(),
        }
    }

    /// Observed bundles followed by the given extras.
    pub fn observed_with(
        d: &IndividualDataset,
        extras: &[(&str, &RVector)],
    ) -> Result<Self, RevprefError> {
        let mut c = Self::observed(d);
        for (label, v) in extras {
            c.push(*label, (*v).clone())?;
        }
        Ok(c)
    }

    pub fn push(
        &mut self,
        label: impl Into<String>,
        bundle: RVector,
    ) -> Result<usize, RevprefError> {
        let label = label.into();
        if self.labels.contains(&label) {
            return Err(RevprefError::DuplicateLabel(label));
        }
        if let Some(first) = self.bundles.first() {
            if first.len() != bundle.len() {
                return Err(RevprefError::Dimension {
                    label,
                    expected: first.len(),
                    found: bundle.len(),
                });
            }
        }
        self.labels.push(label);
        self.bundles.push(bundle);
        Ok(self.bundles.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.bundles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bundles.is_empty()
    }

    pub fn bundle(&self, i: usize) -> &RVector {
        &self.bundles[i]
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Weak and strict edges over a carrier, either direct or closed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationGraph {
    carrier: Carrier,
    weak: Vec<Vec<bool>>,
    strict: Vec<Vec<bool>>,
    closed: bool,
}

impl RelationGraph {
    /// Only the reflexive weak edges.
    pub fn identity(carrier: Carrier) -> Self {
        let n = carrier.len();
        let mut weak = vec![vec![false; n]; n];
        for (i, row) in weak.iter_mut().enumerate() {
            row[i] = true;
        }
        RelationGraph {
            carrier,
            weak,
            strict: vec![vec![false; n]; n],
            closed: false,
        }
    }

    pub fn carrier(&self) -> &Carrier {
        &self.carrier
    }

    pub fn len(&self) -> usize {
        self.carrier.len()
    }

    pub fn is_empty(&self) -> bool {
        self.carrier.is_empty()
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn weak(&self, a: usize, b: usize) -> bool {
        self.weak[a][b]
    }

    pub fn strict(&self, a: usize, b: usize) -> bool {
        self.strict[a][b]
    }

    /// Add a weak edge; marks the graph as no longer closed.
    pub fn add_weak(&mut self, a: usize, b: usize) {
        self.weak[a][b] = true;
        self.closed = false;
    }

    /// Add a strict edge (and its weak shadow).
    pub fn add_strict(&mut self, a: usize, b: usize) {
        self.weak[a][b] = true;
        self.strict[a][b] = true;
        self.closed = false;
    }

    /// Indices `a` with a weak edge `a → b`.
    pub fn weak_predecessors(&self, b: usize) -> Vec<usize> {
        (0..self.len()).filter(|&a| self.weak[a][b]).collect()
    }
}

fn weak_direct(d: &IndividualDataset, a: &RVector, b: &RVector) -> bool {
    a == b
        || d.observations()
            .iter()
            .any(|o| a.ge_all(&o.bundle) && o.income() >= o.cost(b))
}

fn strict_direct(d: &IndividualDataset, a: &RVector, b: &RVector) -> bool {
    a.gg_all(b)
        || d.observations().iter().any(|o| {
            let (inc, cost) = (o.income(), o.cost(b));
            (a.ge_all(&o.bundle) && inc > cost) || (a.gg_all(&o.bundle) && inc >= cost)
        })
}

/// Direct weak and strict relations of `d` over `carrier`.
pub fn direct_relations(
    d: &IndividualDataset,
    carrier: Carrier,
) -> Result<RelationGraph, RevprefError> {
    for (k, o) in d.observations().iter().enumerate() {
        if !carrier.bundles.contains(&o.bundle) {
            return Err(RevprefError::MissingObserved(k + 1));
        }
    }
    for (i, b) in carrier.bundles.iter().enumerate() {
        if b.len() != d.dim() {
            return Err(RevprefError::Dimension {
                label: carrier.label(i).to_string(),
                expected: d.dim(),
                found: b.len(),
            });
        }
    }
    let mut g = RelationGraph::identity(carrier);
    let n = g.len();
    for a in 0..n {
        for b in 0..n {
            let (va, vb) = (g.carrier.bundle(a), g.carrier.bundle(b));
            if strict_direct(d, va, vb) {
                g.add_strict(a, b);
            } else if weak_direct(d, va, vb) {
                g.add_weak(a, b);
            }
        }
    }
    Ok(g)
}

/// Transitive closure: `W*` is reachability and `S* = W* ∘ S ∘ W*`.
pub fn close(g: &RelationGraph) -> RelationGraph {
    let n = g.len();
    let mut w = g.weak.clone();
    for (i, row) in w.iter_mut().enumerate() {
        row[i] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if w[i][k] {
                for j in 0..n {
                    if w[k][j] {
                        w[i][j] = true;
                    }
                }
            }
        }
    }
    // T = S ∘ W*
    let mut t = vec![vec![false; n]; n];
    for u in 0..n {
        for v in 0..n {
            if g.strict[u][v] {
                for b in 0..n {
                    if w[v][b] {
                        t[u][b] = true;
                    }
                }
            }
        }
    }
    let mut s = vec![vec![false; n]; n];
    for a in 0..n {
        for u in 0..n {
            if w[a][u] {
                for b in 0..n {
                    if t[u][b] {
                        s[a][b] = true;
                    }
                }
            }
        }
    }
    RelationGraph {
        carrier: g.carrier.clone(),
        weak: w,
        strict: s,
        closed: true,
    }
}

/// Closed relation of `d` over its observed bundles followed by `extras`.
pub fn closed_relation(
    d: &IndividualDataset,
    extras: &[(&str, &RVector)],
) -> Result<RelationGraph, RevprefError> {
    Ok(close(&direct_relations(
        d,
        Carrier::observed_with(d, extras)?,
    )?))
}

/// A cycle of direct weak edges containing at least one strict edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GarpCycle {
    /// Carrier indices `c_0, …, c_{L−1}`; edges run `c_i → c_{i+1 mod L}`.
    pub nodes: Vec<usize>,
    /// Labels of the same nodes.
    pub labels: Vec<String>,
    /// Position `i` of a strict edge `c_i → c_{i+1}`.
    pub strict_edge: usize,
}

impl GarpCycle {
    /// 1-based observation indices, meaningful when the carrier starts with
    /// the observed bundles (entries beyond the data are reported as-is + 1).
    pub fn observation_indices(&self) -> Vec<usize> {
        self.nodes.iter().map(|n| n + 1).collect()
    }

    /// Check the cycle against a direct relation graph.
    pub fn holds_in(&self, g: &RelationGraph) -> bool {
        let len = self.nodes.len();
        if len == 0 || self.strict_edge >= len || self.nodes.iter().any(|&n| n >= g.len()) {
            return false;
        }
        (0..len).all(|i| g.weak(self.nodes[i], self.nodes[(i + 1) % len]))
            && g.strict(
                self.nodes[self.strict_edge],
                self.nodes[(self.strict_edge + 1) % len],
            )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum GarpReport {
    Pass,
    Violation { cycle: GarpCycle },
}

impl GarpReport {
    pub fn passes(&self) -> bool {
        matches!(self, GarpReport::Pass)
    }

    pub fn cycle(&self) -> Option<&GarpCycle> {
        match self {
            GarpReport::Pass => None,
            GarpReport::Violation { cycle } => Some(cycle),
        }
    }
}

/// Shortest strict cycle in a direct graph, ties broken by the smallest
/// starting node and then lexicographically.
pub fn find_violation(g: &RelationGraph) -> Option<GarpCycle> {
    let n = g.len();
    let succ: Vec<Vec<usize>> = (0..n)
        .map(|a| (0..n).filter(|&b| b != a && g.weak(a, b)).collect())
        .collect();
    let pred: Vec<Vec<usize>> = (0..n)
        .map(|b| (0..n).filter(|&a| a != b && g.weak(a, b)).collect())
        .collect();
    let state = |v: usize, flag: bool| 2 * v + usize::from(flag);

    let mut best: Option<(usize, usize, Vec<usize>)> = None;
    for s in 0..n {
        // Reverse BFS: dist[state] = steps from state to (s, true).
        let mut dist = vec![usize::MAX; 2 * n];
        let mut queue = VecDeque::new();
        dist[state(s, true)] = 0;
        queue.push_back((s, true));
        while let Some((v, flag)) = queue.pop_front() {
            let dv = dist[state(v, flag)];
            for &u in &pred[v] {
                let strict = g.strict(u, v);
                // (u, f) steps to (v, f || strict)
                for f in [false, true] {
                    if (f || strict) == flag && dist[state(u, f)] == usize::MAX {
                        dist[state(u, f)] = dv + 1;
                        queue.push_back((u, f));
                    }
                }
            }
        }
        let total = dist[state(s, false)];
        if total == usize::MAX {
            continue;
        }
        if best.as_ref().is_some_and(|(len, _, _)| *len <= total) {
            continue;
        }
        // Greedy lexicographic walk along the distance layers.
        let mut nodes = vec![s];
        let mut strict_at = None;
        let (mut v, mut flag) = (s, false);
        for step in 0..total {
            let remaining = total - step - 1;
            let next = succ[v]
                .iter()
                .copied()
                .find(|&w| dist[state(w, flag || g.strict(v, w))] == remaining)
                .expect("distance layers are consistent");
            if strict_at.is_none() && g.strict(v, next) {
                strict_at = Some(step);
            }
            flag = flag || g.strict(v, next);
            v = next;
            if step + 1 < total {
                nodes.push(v);
            }
        }
        best = Some((total, strict_at.expect("cycle uses a strict edge"), nodes));
    }
    best.map(|(_, strict_edge, nodes)| GarpCycle {
        labels: nodes
            .iter()
            .map(|&i| g.carrier().label(i).to_string())
            .collect(),
        nodes,
        strict_edge,
    })
}

/// GARP on the observed-bundle carrier.
pub fn check_garp(d: &IndividualDataset) -> GarpReport {
    let g = direct_relations(d, Carrier::observed(d)).expect("observed carrier is complete");
    match find_violation(&g) {
        None => GarpReport::Pass,
        Some(cycle) => GarpReport::Violation { cycle },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Weak,
    Strict,
}

fn check_weights(weights: &[(RVector, Rational)]) -> Result<(), RevprefError> {
    let mut sum = Rational::zero();
    for (_, w) in weights {
        if w.is_negative() {
            return Err(RevprefError::NegativeWeight(w.clone()));
        }
        sum += w;
    }
    if !sum.is_one() {
        return Err(RevprefError::WeightSum(sum));
    }
    Ok(())
}

/// Closed relation over observed bundles, the named candidates and every
/// positively weighted bundle. Returns the graph and the indices of the
/// weighted bundles.
fn weighted_relation(
    d: &IndividualDataset,
    candidates: &[(&str, &RVector)],
    weights: &[(RVector, Rational)],
) -> Result<(RelationGraph, Vec<usize>), RevprefError> {
    let mut carrier = Carrier::observed_with(d, candidates)?;
    let mut idx = Vec::new();
    for (l, (z, w)) in weights.iter().enumerate() {
        if w.is_positive() {
            idx.push(carrier.push(format!("z{}", l + 1), z.clone())?);
        }
    }
    Ok((close(&direct_relations(d, carrier)?), idx))
}

/// Whether the weighted bundles weakly (or strictly) dominate `target`:
/// every positively weighted `z` satisfies `z ⪰^I target`, and in strict
/// mode one of them satisfies `z ≻^I target`. The combination itself is
/// checked by the caller.
pub fn verify_domination(
    d: &IndividualDataset,
    target: &RVector,
    weights: &[(RVector, Rational)],
    mode: Mode,
) -> Result<bool, RevprefError> {
    check_weights(weights)?;
    let (g, idx) = weighted_relation(d, &[("target", target)], weights)?;
    let t = g.carrier().index_of("target").expect("pushed above");
    let all_weak = idx.iter().all(|&z| g.weak(z, t));
    let some_strict = idx.iter().any(|&z| g.strict(z, t));
    Ok(all_weak && (mode == Mode::Weak || some_strict))
}

/// Whether `x̄ = Σ λ_l z^l` bests (strictly bests) `ȳ`.
pub fn verify_besting(
    d: &IndividualDataset,
    xbar: &RVector,
    ybar: &RVector,
    weights: &[(RVector, Rational)],
    mode: Mode,
) -> Result<bool, RevprefError> {
    check_weights(weights)?;
    let combo = RVector::combination(weights.iter().map(|(z, w)| (w, z)), xbar.len());
    if &combo != xbar {
        return Err(RevprefError::Combination {
            expected: xbar.clone(),
            found: combo,
        });
    }
    let (g, idx) = weighted_relation(d, &[("xbar", xbar), ("ybar", ybar)], weights)?;
    let x = g.carrier().index_of("xbar").expect("pushed above");
    let y = g.carrier().index_of("ybar").expect("pushed above");
    if !idx.iter().all(|&z| g.weak(z, x) || g.weak(z, y)) {
        return Ok(false);
    }
    if !idx.iter().any(|&z| g.weak(z, y)) {
        return Ok(false);
    }
    if mode == Mode::Weak {
        return Ok(true);
    }
    // Any strict comparison will do: if u(ȳ) ≥ u(x̄) every term has
    // u(z) ≥ u(x̄), the strict one exceeds it, and concavity breaks.
    Ok(idx.iter().any(|&z| g.strict(z, x) || g.strict(z, y)))
}

/// For each bundle in `bundles`, whether it is weakly and strictly
/// indirectly revealed preferred to `target`.
pub fn dominance_flags(
    d: &IndividualDataset,
    target: &RVector,
    bundles: &[&RVector],
) -> Result<Vec<(bool, bool)>, RevprefError> {
    let mut carrier = Carrier::observed_with(d, &[("target", target)])?;
    let t = d.len();
    let idx: Vec<usize> = bundles
        .iter()
        .enumerate()
        .map(|(l, z)| carrier.push(format!("z{}", l + 1), (*z).clone()))
        .collect::<Result<_, _>>()?;
    let g = close(&direct_relations(d, carrier)?);
    Ok(idx
        .iter()
        .map(|&z| (g.weak(z, t), g.strict(z, t)))
        .collect())
}

/// Role of a term in a convex combination certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermRole {
    /// The bundle must be revealed preferred to the target.
    #[default]
    Revealed,
    /// The bundle is the agent's endowment (Walrasian certificates only).
    Endowment,
}

/// One weighted bundle of a convex combination, with a free-form label
/// saying where it came from (`x3`, `xbar`, `x3+` for a perturbed `x3`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub label: String,
    pub bundle: RVector,
    #[serde(with = "crate::numerics::rational_serde")]
    pub weight: Rational,
    #[serde(default)]
    pub role: TermRole,
}

impl Term {
    pub fn new(label: impl Into<String>, bundle: RVector, weight: Rational) -> Self {
        Term {
            label: label.into(),
            bundle,
            weight,
            role: TermRole::Revealed,
        }
    }

    pub fn endowment(bundle: RVector, weight: Rational) -> Self {
        Term {
            label: "omega".into(),
            bundle,
            weight,
            role: TermRole::Endowment,
        }
    }
}

/// `(bundle, weight)` pairs of the given terms.
pub fn term_weights(terms: &[Term]) -> Vec<(RVector, Rational)> {
    terms
        .iter()
        .map(|t| (t.bundle.clone(), t.weight.clone()))
        .collect()
}

/// `Σ w_l z^l` over the terms.
pub fn term_combination(terms: &[Term], dim: usize) -> RVector {
    RVector::combination(terms.iter().map(|t| (&t.weight, &t.bundle)), dim)
}
