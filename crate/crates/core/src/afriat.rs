//! Afriat inequalities: rationalization, the induced concave utility, and
//! the candidate-augmented systems shared by the welfare testers.
//!
//! For a dataset `{(p^k, x^k)}` the Afriat system asks for levels `U^k` and
//! multipliers `λ^k > 0` with `U^l ≤ U^k + λ^k p^k·(x^l − x^k)` for all
//! `k, l`. A solution exists iff the data satisfy GARP, and then
//! `u(x) = min_k U^k + λ^k p^k·(x − x^k)` rationalizes the data.

use num_traits::Signed;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feasibility::{
    solve, solve_seeded, FeasibilityError, FeasibilityOutcome, FeasibilityProblem, RowKind, RowRef,
};
use crate::model::{IndividualDataset, Observation};
use crate::numerics::{int, solve_square, RVector, Rational};
use crate::revpref::{check_garp, GarpReport};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AfriatError {
    #[error("Afriat numbers do not fit the dataset ({0})")]
    Inconsistent(String),
    #[error("utility maximization needs strictly positive prices and a nonnegative income")]
    Unbounded,
}

/// Levels `U^k` and multipliers `λ^k`, one pair per observation.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AfriatNumbers {
    #[serde(with = "crate::numerics::rational_vec_serde")]
    pub levels: Vec<Rational>,
    #[serde(with = "crate::numerics::rational_vec_serde")]
    pub multipliers: Vec<Rational>,
}

impl AfriatNumbers {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// First violated inequality of the full system, if any.
    pub fn violation(&self, d: &IndividualDataset) -> Option<String> {
        let k_count = d.len();
        if self.levels.len() != k_count || self.multipliers.len() != k_count {
            return Some(format!("expected {k_count} levels and multipliers"));
        }
        for (k, lam) in self.multipliers.iter().enumerate() {
            if !lam.is_positive() {
                return Some(format!("multiplier {} is not positive", k + 1));
            }
        }
        for k in 0..k_count {
            let o = d.obs(k);
            for l in 0..k_count {
                let rhs = &self.levels[k]
                    + &self.multipliers[k] * (o.cost(&d.obs(l).bundle) - o.income());
                if self.levels[l] > rhs {
                    return Some(format!(
                        "U^{} exceeds the bound from observation {}",
                        l + 1,
                        k + 1
                    ));
                }
            }
        }
        None
    }

    /// Whether every inequality of the full system holds exactly.
    pub fn satisfies(&self, d: &IndividualDataset) -> bool {
        self.violation(d).is_none()
    }
}

fn afriat_problem(d: &IndividualDataset) -> FeasibilityProblem {
    let k_count = d.len();
    let mut columns: Vec<String> = (1..=k_count).map(|k| format!("U{k}")).collect();
    columns.extend((1..=k_count).map(|k| format!("lambda{k}")));
    let mut p = FeasibilityProblem::new(columns);
    for k in 0..k_count {
        let o = d.obs(k);
        for l in 0..k_count {
            if l == k {
                continue;
            }
            let coef = o.cost(&d.obs(l).bundle) - o.income();
            p.add_weak(
                format!("({},{})", l + 1, k + 1),
                &[(k, int(1)), (l, int(-1)), (k_count + k, coef)],
            )
            .expect("labels are unique");
        }
    }
    for k in 0..k_count {
        p.add_strict(format!("{} positivity", k + 1), &[(k_count + k, int(1))])
            .expect("labels are unique");
    }
    p
}

fn numbers_from(d: &IndividualDataset, out: FeasibilityOutcome) -> AfriatNumbers {
    let k_count = d.len();
    match out {
        FeasibilityOutcome::Primal(w) => {
            let v = w.v.into_entries();
            AfriatNumbers {
                levels: v[..k_count].to_vec(),
                multipliers: v[k_count..].to_vec(),
            }
        }
        FeasibilityOutcome::Dual(_) => {
            panic!(
                "Afriat system infeasible although GARP holds for agent {:?}",
                d.id()
            )
        }
    }
}

/// The full Afriat system of `d` as a feasibility problem in
/// `(U^1, …, U^K, λ^1, …, λ^K)`.
pub fn afriat_system(d: &IndividualDataset) -> FeasibilityProblem {
    afriat_problem(d)
}

/// Afriat numbers for `d`, or the GARP violation that rules them out.
pub fn rationalize(d: &IndividualDataset) -> Result<AfriatNumbers, GarpReport> {
    let report = check_garp(d);
    if !report.passes() {
        return Err(report);
    }
    if d.is_empty() {
        return Ok(AfriatNumbers::default());
    }
    Ok(numbers_from(d, solve(&afriat_problem(d))))
}

/// As [`rationalize`], with the solver's pivoting order shuffled by `seed`.
pub fn rationalize_seeded(d: &IndividualDataset, seed: u64) -> Result<AfriatNumbers, GarpReport> {
    let report = check_garp(d);
    if !report.passes() {
        return Err(report);
    }
    if d.is_empty() {
        return Ok(AfriatNumbers::default());
    }
    Ok(numbers_from(d, solve_seeded(&afriat_problem(d), seed)))
}

/// Afriat system restricted to pairs with `p^k·(x^l − x^k) ≤ 0`.
pub fn restricted_afriat_system(d: &IndividualDataset) -> FeasibilityProblem {
    let full = afriat_problem(d);
    let mut p = FeasibilityProblem::new(full.columns().to_vec());
    let k_count = d.len();
    for k in 0..k_count {
        let o = d.obs(k);
        for l in 0..k_count {
            let coef = o.cost(&d.obs(l).bundle) - o.income();
            if l == k || coef.is_positive() {
                continue;
            }
            p.add_weak(
                format!("({},{})", l + 1, k + 1),
                &[(k, int(1)), (l, int(-1)), (k_count + k, coef)],
            )
            .expect("labels are unique");
        }
    }
    for k in 0..k_count {
        p.add_strict(format!("{} positivity", k + 1), &[(k_count + k, int(1))])
            .expect("labels are unique");
    }
    p
}

/// One linear piece `U + λ p·(x − x̂)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Piece {
    #[serde(with = "crate::numerics::rational_serde")]
    pub level: Rational,
    #[serde(with = "crate::numerics::rational_serde")]
    pub multiplier: Rational,
    pub price: RVector,
    pub bundle: RVector,
}

impl Piece {
    pub fn eval(&self, x: &RVector) -> Rational {
        &self.level + &self.multiplier * self.price.dot_unchecked(&x.sub(&self.bundle))
    }
}

/// `u(x) = min_k U^k + λ^k p^k·(x − x^k)`. Without pieces (empty data) the
/// utility is `Σ_j x_j`, which is increasing and rationalizes nothing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiecewiseUtility {
    pub dim: usize,
    pub pieces: Vec<Piece>,
}

impl PiecewiseUtility {
    pub fn eval(&self, x: &RVector) -> Rational {
        self.pieces
            .iter()
            .map(|p| p.eval(x))
            .min()
            .unwrap_or_else(|| x.sum())
    }

    /// A maximizer of `u` on the budget `{z ≥ 0 : p·z ≤ I}` and its value.
    ///
    /// The problem `max t` subject to `t ≤ piece_k(z)`, `p·z ≤ I`, `z ≥ 0` is
    /// a bounded LP in `(z, t)` when `p ≫ 0`, so an optimum sits at a vertex:
    /// `m + 1` tight constraints with a unique solution. We enumerate them.
    pub fn maximize(
        &self,
        price: &RVector,
        income: &Rational,
    ) -> Result<(RVector, Rational), AfriatError> {
        let m = self.dim;
        if price.len() != m || price.iter().any(|p| !p.is_positive()) || income.is_negative() {
            return Err(AfriatError::Unbounded);
        }
        if self.pieces.is_empty() {
            // Σ z is maximized by spending everything on the cheapest good.
            let (j, pj) = price
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.cmp(b.1))
                .expect("m > 0");
            let mut z = RVector::zeros(m).into_entries();
            z[j] = income / pj;
            let z = RVector::new(z);
            let v = z.sum();
            return Ok((z, v));
        }
        // Constraints as rows a·(z, t) ≤ b.
        let mut rows: Vec<(Vec<Rational>, Rational)> = Vec::new();
        for piece in &self.pieces {
            // t − λ p·z ≤ U − λ p·x̂
            let mut a: Vec<Rational> = piece
                .price
                .iter()
                .map(|c| -(&piece.multiplier * c))
                .collect();
            a.push(int(1));
            let b = &piece.level - &piece.multiplier * piece.price.dot_unchecked(&piece.bundle);
            rows.push((a, b));
        }
        let mut budget: Vec<Rational> = price.entries().to_vec();
        budget.push(int(0));
        rows.push((budget, income.clone()));
        for j in 0..m {
            let mut a = vec![int(0); m + 1];
            a[j] = int(-1);
            rows.push((a, int(0)));
        }
        let feasible = |x: &[Rational]| {
            rows.iter().all(|(a, b)| {
                let lhs: Rational = a.iter().zip(x).map(|(p, q)| p * q).sum();
                &lhs <= b
            })
        };
        let mut best: Option<(Vec<Rational>, Rational)> = None;
        let mut pick = Vec::with_capacity(m + 1);
        choose(rows.len(), m + 1, 0, &mut pick, &mut |subset| {
            let a: Vec<Vec<Rational>> = subset.iter().map(|&i| rows[i].0.clone()).collect();
            let b: Vec<Rational> = subset.iter().map(|&i| rows[i].1.clone()).collect();
            if let Some(x) = solve_square(&a, &b) {
                if feasible(&x) && best.as_ref().is_none_or(|(_, t)| x[m] > *t) {
                    let t = x[m].clone();
                    best = Some((x, t));
                }
            }
        });
        let (x, t) = best.expect("bounded nonempty polytope has a vertex");
        Ok((RVector::new(x[..m].to_vec()), t))
    }
}

fn choose(n: usize, k: usize, start: usize, pick: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if pick.len() == k {
        f(pick);
        return;
    }
    for i in start..n {
        if n - i < k - pick.len() {
            break;
        }
        pick.push(i);
        choose(n, k, i + 1, pick, f);
        pick.pop();
    }
}

/// The concave piecewise-linear utility induced by `a`.
pub fn build_utility(
    a: &AfriatNumbers,
    d: &IndividualDataset,
) -> Result<PiecewiseUtility, AfriatError> {
    if let Some(why) = a.violation(d) {
        return Err(AfriatError::Inconsistent(why));
    }
    Ok(PiecewiseUtility {
        dim: d.dim(),
        pieces: d
            .observations()
            .iter()
            .zip(a.levels.iter().zip(&a.multipliers))
            .map(|(o, (u, l))| Piece {
                level: u.clone(),
                multiplier: l.clone(),
                price: o.price.clone(),
                bundle: o.bundle.clone(),
            })
            .collect(),
    })
}

/// A node of the augmented graph: an observation or the candidate `*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Obs(usize),
    Candidate,
}

/// Rows of the augmented system for one agent. Indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugmentedRowKind {
    /// `U^k − U^l + λ^k p^k·(x^l − x^k) ≥ 0`, present when the coefficient is ≤ 0.
    Data { k: usize, l: usize },
    /// `U^k − ū + λ^k p^k·(x̄ − x^k) ≥ 0`, present when the coefficient is ≤ 0.
    Budget { k: usize },
    /// `ū − U^k + q·(x^k − x̄) ≥ 0`: the candidate demanded at price `q`.
    Support { k: usize },
    /// `ū − U^k ≥ 0`: the candidate is at least as good as every observation.
    Top { k: usize },
    /// `λ^k > 0`.
    Positivity { k: usize },
}

impl AugmentedRowKind {
    /// Edge `from → to` carried by the row's `±1` pattern on the level
    /// columns: `+1` on `from`, `−1` on `to`.
    pub fn edge(&self) -> Option<(Node, Node)> {
        match *self {
            AugmentedRowKind::Data { k, l } => Some((Node::Obs(k), Node::Obs(l))),
            AugmentedRowKind::Budget { k } => Some((Node::Obs(k), Node::Candidate)),
            AugmentedRowKind::Support { k } | AugmentedRowKind::Top { k } => {
                Some((Node::Candidate, Node::Obs(k)))
            }
            AugmentedRowKind::Positivity { .. } => None,
        }
    }

    /// Observation whose multiplier column carries a coefficient, with the
    /// coefficient's sign being `≤ 0` by construction.
    pub fn multiplier_of(&self) -> Option<usize> {
        match *self {
            AugmentedRowKind::Data { k, .. } | AugmentedRowKind::Budget { k } => Some(k),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentedRow {
    pub kind: AugmentedRowKind,
    pub row: RowRef,
}

/// Column positions of one agent's block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockColumns {
    pub levels: Vec<usize>,
    pub top: usize,
    pub multipliers: Vec<usize>,
}

impl BlockColumns {
    /// Append labels `U^k`, `ū`, `λ^k` for agent `id` with `k_count` observations.
    pub fn allocate(columns: &mut Vec<String>, id: &str, k_count: usize) -> Self {
        let mut push = |label: String| {
            columns.push(label);
            columns.len() - 1
        };
        let levels = (1..=k_count)
            .map(|k| push(format!("U{k} agent {id}")))
            .collect();
        let top = push(format!("ubar agent {id}"));
        let multipliers = (1..=k_count)
            .map(|k| push(format!("lambda{k} agent {id}")))
            .collect();
        BlockColumns {
            levels,
            top,
            multipliers,
        }
    }
}

/// Which optional row families to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AugmentOptions {
    /// Emit `(k,*)` rows carrying the price columns.
    pub support: bool,
    /// Emit `ū ≥ U^k` rows.
    pub top: bool,
}

/// Emit one agent's rows of the candidate-augmented Afriat system into `p`.
///
/// The multiplier attached to the candidate is normalized to 1, so the
/// `(k,*)` rows read `ū − U^k + q·(x^k − x̄) ≥ 0` with `q` in `price_columns`.
pub fn augmented_afriat_rows(
    p: &mut FeasibilityProblem,
    d: &IndividualDataset,
    candidate: &RVector,
    cols: &BlockColumns,
    price_columns: &[usize],
    options: AugmentOptions,
) -> Result<Vec<AugmentedRow>, FeasibilityError> {
    if candidate.len() != d.dim() || (options.support && price_columns.len() != d.dim()) {
        return Err(FeasibilityError::RowLength {
            label: format!("candidate for agent {}", d.id()),
            expected: d.dim(),
            found: candidate.len(),
        });
    }
    let id = d.id();
    let mut rows = Vec::new();
    let obs = d.observations();
    for (k, o) in obs.iter().enumerate() {
        for (l, ol) in obs.iter().enumerate() {
            let coef = o.cost(&ol.bundle) - o.income();
            if l == k || coef.is_positive() {
                continue;
            }
            let row = p.add_weak(
                format!("({},{}) agent {id}", l + 1, k + 1),
                &[
                    (cols.levels[k], int(1)),
                    (cols.levels[l], int(-1)),
                    (cols.multipliers[k], coef),
                ],
            )?;
            rows.push(AugmentedRow {
                kind: AugmentedRowKind::Data { k, l },
                row,
            });
        }
    }
    for (k, o) in obs.iter().enumerate() {
        let coef = o.cost(candidate) - o.income();
        if coef.is_positive() {
            continue;
        }
        let row = p.add_weak(
            format!("(*,{}) agent {id}", k + 1),
            &[
                (cols.levels[k], int(1)),
                (cols.top, int(-1)),
                (cols.multipliers[k], coef),
            ],
        )?;
        rows.push(AugmentedRow {
            kind: AugmentedRowKind::Budget { k },
            row,
        });
    }
    if options.support {
        for (k, o) in obs.iter().enumerate() {
            let diff = o.bundle.sub(candidate);
            let mut terms = vec![(cols.top, int(1)), (cols.levels[k], int(-1))];
            terms.extend(
                price_columns
                    .iter()
                    .zip(diff.iter())
                    .map(|(&c, a)| (c, a.clone())),
            );
            let row = p.add_weak(format!("({},*) agent {id}", k + 1), &terms)?;
            rows.push(AugmentedRow {
                kind: AugmentedRowKind::Support { k },
                row,
            });
        }
    }
    if options.top {
        for k in 0..obs.len() {
            let row = p.add_weak(
                format!("top {} agent {id}", k + 1),
                &[(cols.top, int(1)), (cols.levels[k], int(-1))],
            )?;
            rows.push(AugmentedRow {
                kind: AugmentedRowKind::Top { k },
                row,
            });
        }
    }
    for k in 0..obs.len() {
        let row = p.add_row(
            RowKind::Strict,
            format!("{} positivity agent {id}", k + 1),
            RVector::unit(p.num_vars(), cols.multipliers[k]),
        )?;
        rows.push(AugmentedRow {
            kind: AugmentedRowKind::Positivity { k },
            row,
        });
    }
    Ok(rows)
}

/// `d` with the candidate appended as an observation at price `q`.
pub fn with_candidate(
    d: &IndividualDataset,
    q: &RVector,
    candidate: &RVector,
) -> IndividualDataset {
    d.with_observation(Observation::new(q.clone(), candidate.clone()))
        .expect("price and candidate were validated by the caller")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ratio;

    fn ds(pairs: &[(&[i64], &[i64])]) -> IndividualDataset {
        IndividualDataset::from_ints("2", pairs).unwrap()
    }

    fn agent2() -> IndividualDataset {
        ds(&[
            (&[2, 1], &[1, 2]),
            (&[2, 1], &[0, 4]),
            (&[1, 2], &[2, 1]),
            (&[1, 2], &[4, 0]),
        ])
    }

    #[test]
    fn rationalizes_the_example_agent() {
        let d = agent2();
        let a = rationalize(&d).unwrap();
        assert_eq!(a.len(), 4);
        assert!(a.satisfies(&d));
        for seed in 0..5 {
            assert!(rationalize_seeded(&d, seed).unwrap().satisfies(&d));
        }
    }

    #[test]
    fn empty_dataset_is_vacuous() {
        let d = IndividualDataset::empty("1", 2).unwrap();
        assert!(rationalize(&d).unwrap().is_empty());
    }

    #[test]
    fn violating_dataset_reports_the_cycle() {
        let d = ds(&[(&[1, 1], &[4, 0]), (&[1, 2], &[0, 3])]);
        let report = rationalize(&d).unwrap_err();
        assert_eq!(report.cycle().unwrap().observation_indices(), vec![1, 2]);
    }

    #[test]
    fn one_piece_utility() {
        let d = ds(&[(&[1, 1], &[1, 1])]);
        let a = AfriatNumbers {
            levels: vec![int(0)],
            multipliers: vec![int(1)],
        };
        let u = build_utility(&a, &d).unwrap();
        assert_eq!(u.eval(&RVector::from_ints(&[1, 1])), int(0));
        assert_eq!(u.eval(&RVector::from_ints(&[3, 0])), int(1));
        assert!(u.eval(&RVector::from_ints(&[2, 2])) >= u.eval(&RVector::from_ints(&[1, 1])));
    }

    #[test]
    fn utility_rationalizes_on_a_budget_grid() {
        let d = agent2();
        let u = build_utility(&rationalize(&d).unwrap(), &d).unwrap();
        for (k, o) in d.observations().iter().enumerate() {
            let top = u.eval(&o.bundle);
            assert_eq!(top, rationalize(&d).unwrap().levels[k]);
            for i in 0..=8 {
                for j in 0..=8 {
                    let y = RVector::new(vec![ratio(i, 2), ratio(j, 2)]);
                    if o.cost(&y) <= o.income() {
                        assert!(u.eval(&y) <= top, "k={k} y={y}");
                    }
                }
            }
        }
    }

    #[test]
    fn inconsistent_numbers_are_rejected() {
        let d = ds(&[(&[1, 1], &[1, 1]), (&[1, 1], &[2, 2])]);
        let a = AfriatNumbers {
            levels: vec![int(5), int(0)],
            multipliers: vec![int(1), int(1)],
        };
        assert!(matches!(
            build_utility(&a, &d),
            Err(AfriatError::Inconsistent(_))
        ));
    }

    #[test]
    fn restricted_and_full_systems_agree_here() {
        let d = agent2();
        assert!(solve(&restricted_afriat_system(&d)).is_feasible());
        assert!(solve(&afriat_system(&d)).is_feasible());
    }

    #[test]
    fn maximizer_recovers_observed_demand_value() {
        let d = agent2();
        let u = build_utility(&rationalize(&d).unwrap(), &d).unwrap();
        for o in d.observations() {
            let (z, v) = u.maximize(&o.price, &o.income()).unwrap();
            assert!(o.cost(&z) <= o.income());
            assert_eq!(v, u.eval(&o.bundle));
        }
        let empty = PiecewiseUtility {
            dim: 2,
            pieces: vec![],
        };
        let (z, v) = empty
            .maximize(&RVector::from_ints(&[2, 1]), &int(4))
            .unwrap();
        assert_eq!(z, RVector::from_ints(&[0, 4]));
        assert_eq!(v, int(4));
        assert!(empty
            .maximize(&RVector::from_ints(&[0, 1]), &int(1))
            .is_err());
    }

    fn block(d: &IndividualDataset, candidate: &RVector) -> Vec<AugmentedRow> {
        let mut columns = Vec::new();
        let cols = BlockColumns::allocate(&mut columns, d.id(), d.len());
        let q: Vec<usize> = (0..d.dim())
            .map(|j| {
                columns.push(format!("q{}", j + 1));
                columns.len() - 1
            })
            .collect();
        let mut p = FeasibilityProblem::new(columns);
        augmented_afriat_rows(
            &mut p,
            d,
            candidate,
            &cols,
            &q,
            AugmentOptions {
                support: true,
                top: false,
            },
        )
        .unwrap()
    }

    #[test]
    fn augmented_row_counts() {
        let empty = IndividualDataset::empty("1", 2).unwrap();
        assert!(block(&empty, &RVector::from_ints(&[1, 0])).is_empty());

        let one = ds(&[(&[1, 1], &[1, 1])]);
        let rows = block(&one, &RVector::from_ints(&[1, 0]));
        let count = |f: fn(&AugmentedRowKind) -> bool| rows.iter().filter(|r| f(&r.kind)).count();
        assert_eq!(count(|k| matches!(k, AugmentedRowKind::Budget { .. })), 1);
        assert_eq!(count(|k| matches!(k, AugmentedRowKind::Support { .. })), 1);
        assert_eq!(
            count(|k| matches!(k, AugmentedRowKind::Positivity { .. })),
            1
        );
        assert_eq!(rows.len(), 3);

        let rows = block(&agent2(), &RVector::from_ints(&[0, 4]));
        let budget: Vec<usize> = rows
            .iter()
            .filter_map(|r| match r.kind {
                AugmentedRowKind::Budget { k } => Some(k + 1),
                _ => None,
            })
            .collect();
        assert_eq!(budget, vec![1, 2]);
    }
}
