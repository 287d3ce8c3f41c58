//! Counterfactual welfare for one consumer: robust ranking of two
//! unobserved bundles, and whether a new bundle can sit on top of the data.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::afriat::{
    augmented_afriat_rows, AfriatNumbers, AugmentOptions, AugmentedRow, AugmentedRowKind,
    BlockColumns, Node,
};
use crate::feasibility::{
    decompose_cycles, solve, DualCertificate, FeasibilityOutcome, FeasibilityProblem, RowKind,
    RowRef, WeightedEdge,
};
use crate::model::{IndividualDataset, Observation};
use crate::numerics::{int, RVector, Rational};
use crate::revpref::{
    check_garp, close, direct_relations, find_violation, verify_besting, Carrier, GarpCycle, Mode,
    RelationGraph, Term,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IndividualError {
    #[error("bundle has {found} coordinates, dataset has {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("bundle has a negative coordinate")]
    Negative,
    #[error("could not assemble a certificate from the dual solution: {0}")]
    Construction(String),
}

fn check_bundle(d: &IndividualDataset, x: &RVector) -> Result<(), IndividualError> {
    if x.len() != d.dim() {
        return Err(IndividualError::Dimension {
            expected: d.dim(),
            found: x.len(),
        });
    }
    if !x.is_nonnegative() {
        return Err(IndividualError::Negative);
    }
    Ok(())
}

/// Append `q ≥ 0` rows and the strict row `M: Σ q > 0` for the given columns.
pub(crate) fn price_rows(p: &mut FeasibilityProblem, q: &[usize]) -> RowRef {
    for (j, &c) in q.iter().enumerate() {
        p.add_weak(format!("q{} >= 0", j + 1), &[(c, int(1))])
            .expect("fresh label");
    }
    let terms: Vec<(usize, Rational)> = q.iter().map(|&c| (c, int(1))).collect();
    p.add_strict("M", &terms).expect("fresh label")
}

/// One row of the ranking system: `q·(z − x̄) ≥ 0` or `> 0` for carrier node `z`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarianRow {
    pub node: usize,
    pub strict: bool,
}

/// The ranking system in price columns `q`: for every carrier bundle `z`
/// (observations, `x̄`, `ȳ`) revealed preferred to `x̄` or to `ȳ`, the
/// weak row `q·(z − x̄) ≥ 0`, made strict when the preference is strict,
/// plus `q ≥ 0` and `Σ q > 0`.
pub fn varian_system(
    d: &IndividualDataset,
    xbar: &RVector,
    ybar: &RVector,
) -> (FeasibilityProblem, RelationGraph, Vec<VarianRow>) {
    let carrier =
        Carrier::observed_with(d, &[("xbar", xbar), ("ybar", ybar)]).expect("labels are fresh");
    let g = close(&direct_relations(d, carrier).expect("observed carrier"));
    let (x, y) = (d.len(), d.len() + 1);
    let mut p = FeasibilityProblem::new((1..=d.dim()).map(|j| format!("q{j}")).collect());
    let mut rows = Vec::new();
    for z in 0..g.len() {
        if !(g.weak(z, x) || g.weak(z, y)) {
            continue;
        }
        let diff = g.carrier().bundle(z).sub(xbar);
        let strict = g.strict(z, x) || g.strict(z, y);
        let label = g.carrier().label(z).to_string();
        p.add_row(RowKind::Weak, format!("{label} weak"), diff.clone())
            .expect("fresh label");
        rows.push(VarianRow {
            node: z,
            strict: false,
        });
        if strict {
            p.add_row(RowKind::Strict, format!("{label} strict"), diff)
                .expect("fresh label");
            rows.push(VarianRow {
                node: z,
                strict: true,
            });
        }
    }
    let q: Vec<usize> = (0..d.dim()).collect();
    price_rows(&mut p, &q);
    (p, g, rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RankAnswer {
    RobustlyBetter,
    NotRobust,
    SelfBesting,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankVerdict {
    pub answer: RankAnswer,
    /// Strict besting weights for `RobustlyBetter`, or the terms by which
    /// `x̄` strictly bests itself for `SelfBesting`.
    pub terms: Option<Vec<Term>>,
    /// Price `q` solving the ranking system, for `NotRobust`.
    pub price: Option<RVector>,
}

/// Turn a dual solution of the ranking system into besting terms.
fn besting_terms(
    d: &IndividualDataset,
    xbar: &RVector,
    ybar: &RVector,
    g: &RelationGraph,
    rows: &[VarianRow],
    cert: &DualCertificate,
) -> Result<Vec<Term>, IndividualError> {
    // Rows were added in `rows` order, weak and strict interleaved.
    let (mut wi, mut si) = (0, 0);
    let mut weight = vec![Rational::zero(); g.len()];
    let mut strict_mass = vec![false; g.len()];
    for r in rows {
        let w = if r.strict {
            si += 1;
            &cert.strict_weights[si - 1]
        } else {
            wi += 1;
            &cert.weak_weights[wi - 1]
        };
        weight[r.node] += w;
        if r.strict && w.is_positive() {
            strict_mass[r.node] = true;
        }
    }
    let total: Rational = weight.iter().sum();
    if !total.is_positive() {
        return Err(IndividualError::Construction(
            "dual puts no weight on bundles".into(),
        ));
    }
    let terms: Vec<(usize, Term)> = (0..g.len())
        .filter(|&z| weight[z].is_positive())
        .map(|z| {
            (
                z,
                Term::new(
                    g.carrier().label(z),
                    g.carrier().bundle(z).clone(),
                    &weight[z] / &total,
                ),
            )
        })
        .collect();
    let combo = terms
        .iter()
        .fold(RVector::zeros(xbar.len()), |acc, (_, t)| {
            acc.add(&t.bundle.scale(&t.weight))
        });
    let residual = xbar.sub(&combo);
    debug_assert!(residual.is_nonnegative());
    let check = |ts: &[(usize, Term)]| {
        let w: Vec<(RVector, Rational)> = ts
            .iter()
            .map(|(_, t)| (t.bundle.clone(), t.weight.clone()))
            .collect();
        verify_besting(d, xbar, ybar, &w, Mode::Strict).unwrap_or(false)
    };
    if residual.is_zero() {
        return if check(&terms) {
            Ok(terms.into_iter().map(|(_, t)| t).collect())
        } else {
            Err(IndividualError::Construction(
                "dual combination does not best".into(),
            ))
        };
    }
    // Absorb the residual into one term, trying terms with strict dual mass
    // and observed bundles first since those keep their comparisons.
    let mut order: Vec<usize> = (0..terms.len()).collect();
    order.sort_by_key(|&i| {
        let z = terms[i].0;
        (!strict_mass[z], z >= d.len())
    });
    for i in order {
        let mut trial = terms.clone();
        let t = &mut trial[i].1;
        t.bundle = t.bundle.add(&residual.scale(&t.weight.recip()));
        t.label = format!("{}+", t.label);
        if check(&trial) {
            return Ok(trial.into_iter().map(|(_, t)| t).collect());
        }
    }
    Err(IndividualError::Construction(
        "no term absorbs the residual".into(),
    ))
}

fn decide_besting(
    d: &IndividualDataset,
    xbar: &RVector,
    ybar: &RVector,
) -> Result<Result<Vec<Term>, RVector>, IndividualError> {
    let (p, g, rows) = varian_system(d, xbar, ybar);
    match solve(&p) {
        FeasibilityOutcome::Primal(w) => Ok(Err(w.v)),
        FeasibilityOutcome::Dual(cert) => besting_terms(d, xbar, ybar, &g, &rows, &cert).map(Ok),
    }
}

/// Whether `x̄` strictly bests itself, i.e. no price makes it a choice
/// compatible with the data.
pub fn self_besting(d: &IndividualDataset, xbar: &RVector) -> Result<bool, IndividualError> {
    check_bundle(d, xbar)?;
    let (p, _, _) = varian_system(d, xbar, xbar);
    Ok(!solve(&p).is_feasible())
}

/// Is `x̄` ranked above `ȳ` by every concave, monotone rationalizing utility?
pub fn rank_robust(
    d: &IndividualDataset,
    xbar: &RVector,
    ybar: &RVector,
) -> Result<RankVerdict, IndividualError> {
    check_bundle(d, xbar)?;
    check_bundle(d, ybar)?;
    if let Ok(terms) = decide_besting(d, xbar, xbar)? {
        return Ok(RankVerdict {
            answer: RankAnswer::SelfBesting,
            terms: Some(terms),
            price: None,
        });
    }
    Ok(match decide_besting(d, xbar, ybar)? {
        Ok(terms) => RankVerdict {
            answer: RankAnswer::RobustlyBetter,
            terms: Some(terms),
            price: None,
        },
        Err(q) => RankVerdict {
            answer: RankAnswer::NotRobust,
            terms: None,
            price: Some(q),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AcceptAnswer {
    Acceptable,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AcceptCertificate {
    /// `x̄` demanded at `price`; `numbers` solve the Afriat system of the
    /// data with `(price, x̄)` appended, and the last level is the largest.
    Top {
        price: RVector,
        numbers: AfriatNumbers,
    },
    /// A strict revealed-preference cycle once `x̄ ⪰ x^k` is added for all
    /// `k`. Node `K` (0-based) is `x̄`; when it is absent the data alone
    /// violate GARP.
    Cycle { cycle: GarpCycle },
    /// Terms of a bundle `y ≤ x̄` that strictly dominates `x̄`.
    Dominated {
        terms: Vec<Term>,
        combination: RVector,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptVerdict {
    pub answer: AcceptAnswer,
    pub certificate: AcceptCertificate,
}

/// Direct relation over observed bundles and `x̄`, plus `x̄ ⪰ x^k` for all `k`.
pub fn top_relation(d: &IndividualDataset, xbar: &RVector) -> RelationGraph {
    let carrier = Carrier::observed_with(d, &[("xbar", xbar)]).expect("fresh label");
    let mut g = direct_relations(d, carrier).expect("observed carrier");
    for k in 0..d.len() {
        g.add_weak(d.len(), k);
    }
    g
}

/// Full Afriat system of the data with `(q, x̄)` appended, plus `U^* ≥ U^k`.
fn top_numbers(d: &IndividualDataset, q: &RVector, xbar: &RVector) -> Option<AfriatNumbers> {
    let aug = d
        .with_observation(Observation::new(q.clone(), xbar.clone()))
        .ok()?;
    let mut p = crate::afriat::afriat_system(&aug);
    let star = d.len();
    for k in 0..d.len() {
        p.add_weak(format!("top {}", k + 1), &[(star, int(1)), (k, int(-1))])
            .ok()?;
    }
    match solve(&p) {
        FeasibilityOutcome::Primal(w) => {
            let v = w.v.into_entries();
            let n = aug.len();
            Some(AfriatNumbers {
                levels: v[..n].to_vec(),
                multipliers: v[n..].to_vec(),
            })
        }
        FeasibilityOutcome::Dual(_) => None,
    }
}

struct TopSystem {
    problem: FeasibilityProblem,
    cols: BlockColumns,
    q: Vec<usize>,
    rows: Vec<AugmentedRow>,
    m: RowRef,
}

fn top_system(d: &IndividualDataset, xbar: &RVector) -> TopSystem {
    let mut columns = Vec::new();
    let cols = BlockColumns::allocate(&mut columns, d.id(), d.len());
    let q: Vec<usize> = (1..=d.dim())
        .map(|j| {
            columns.push(format!("q{j}"));
            columns.len() - 1
        })
        .collect();
    let mut problem = FeasibilityProblem::new(columns);
    let rows = augmented_afriat_rows(
        &mut problem,
        d,
        xbar,
        &cols,
        &q,
        AugmentOptions {
            support: true,
            top: true,
        },
    )
    .expect("dimensions checked");
    let m = price_rows(&mut problem, &q);
    TopSystem {
        problem,
        m,
        cols,
        q,
        rows,
    }
}

/// Edges of one agent's augmented graph with their dual weights. Node ids:
/// observation `k` is `k`, the candidate is `K`.
pub(crate) fn weighted_edges(
    rows: &[AugmentedRow],
    cert: &DualCertificate,
    k_count: usize,
) -> Vec<WeightedEdge> {
    let node = |n: Node| match n {
        Node::Obs(k) => k,
        Node::Candidate => k_count,
    };
    rows.iter()
        .enumerate()
        .filter_map(|(id, r)| {
            let (from, to) = r.kind.edge()?;
            Some(WeightedEdge {
                id,
                from: node(from),
                to: node(to),
                weight: cert.weight(r.row).clone(),
            })
        })
        .collect()
}

/// A row with positive dual weight and a negative coefficient on a
/// multiplier that itself carries positive strict weight: a strict edge.
pub(crate) fn strict_edge_rows(
    p: &FeasibilityProblem,
    rows: &[AugmentedRow],
    cols: &BlockColumns,
    cert: &DualCertificate,
) -> Vec<usize> {
    rows.iter()
        .enumerate()
        .filter(|(_, r)| {
            let Some(k) = r.kind.multiplier_of() else {
                return false;
            };
            cert.weight(r.row).is_positive() && p.row(r.row)[cols.multipliers[k]].is_negative()
        })
        .map(|(i, _)| i)
        .collect()
}

/// The system [`acceptable_top`] solves once the data pass GARP.
pub fn acceptance_system(
    d: &IndividualDataset,
    xbar: &RVector,
) -> Result<FeasibilityProblem, IndividualError> {
    check_bundle(d, xbar)?;
    Ok(top_system(d, xbar).problem)
}

/// Can `x̄` be at least as good as every observed bundle for some
/// increasing, explicitly quasiconcave rationalizing utility?
pub fn acceptable_top(
    d: &IndividualDataset,
    xbar: &RVector,
) -> Result<AcceptVerdict, IndividualError> {
    check_bundle(d, xbar)?;
    if let Some(cycle) = check_garp(d).cycle() {
        return Ok(AcceptVerdict {
            answer: AcceptAnswer::Rejected,
            certificate: AcceptCertificate::Cycle {
                cycle: cycle.clone(),
            },
        });
    }
    let sys = top_system(d, xbar);
    let cert = match solve(&sys.problem) {
        FeasibilityOutcome::Primal(w) => {
            let q = RVector::new(sys.q.iter().map(|&c| w.v[c].clone()).collect());
            let numbers = top_numbers(d, &q, xbar).ok_or_else(|| {
                IndividualError::Construction(
                    "full Afriat system with top rows is infeasible".into(),
                )
            })?;
            return Ok(AcceptVerdict {
                answer: AcceptAnswer::Acceptable,
                certificate: AcceptCertificate::Top { price: q, numbers },
            });
        }
        FeasibilityOutcome::Dual(c) => c,
    };
    let k_count = d.len();
    let support: Vec<Rational> = (0..k_count)
        .map(|k| {
            sys.rows
                .iter()
                .find(|r| r.kind == AugmentedRowKind::Support { k })
                .map(|r| cert.weight(r.row).clone())
                .unwrap_or_default()
        })
        .collect();
    let m_weight = cert.weight(sys.m).clone();

    let dominated = |terms: Vec<Term>| {
        let combination = crate::revpref::term_combination(&terms, d.dim());
        AcceptVerdict {
            answer: AcceptAnswer::Rejected,
            certificate: AcceptCertificate::Dominated { terms, combination },
        }
    };
    let normalized_terms = || -> Vec<Term> {
        let total: Rational = support.iter().sum();
        (0..k_count)
            .filter(|&k| support[k].is_positive())
            .map(|k| {
                Term::new(
                    format!("x{}", k + 1),
                    d.obs(k).bundle.clone(),
                    &support[k] / &total,
                )
            })
            .collect()
    };

    if m_weight.is_positive() {
        // Σ θ^k (x̄ − x^k) ≫ 0: push the gap into one term to get y = x̄.
        let mut terms = normalized_terms();
        let gap = xbar.sub(&crate::revpref::term_combination(&terms, d.dim()));
        let t = &mut terms[0];
        t.bundle = t.bundle.add(&gap.scale(&t.weight.recip()));
        t.label.push('+');
        return Ok(dominated(terms));
    }

    // A strict edge with positive weight lies on a cycle through x̄.
    let edges = weighted_edges(&sys.rows, &cert, k_count);
    let cycles =
        decompose_cycles(&edges).map_err(|e| IndividualError::Construction(e.to_string()))?;
    let strict = strict_edge_rows(&sys.problem, &sys.rows, &sys.cols, &cert);
    let cycle = cycles
        .iter()
        .find(|c| c.edges.iter().any(|e| strict.contains(e)))
        .ok_or_else(|| IndividualError::Construction("no cycle carries a strict edge".into()))?;
    let entry = cycle
        .edges
        .iter()
        .find(|&&e| matches!(sys.rows[e].kind.edge(), Some((Node::Candidate, _))))
        .ok_or_else(|| IndividualError::Construction("strict cycle avoids x̄".into()))?;
    match sys.rows[*entry].kind {
        AugmentedRowKind::Support { .. } => Ok(dominated(normalized_terms())),
        _ => {
            let g = top_relation(d, xbar);
            let cycle = find_violation(&g).ok_or_else(|| {
                IndividualError::Construction("top relation has no strict cycle".into())
            })?;
            Ok(AcceptVerdict {
                answer: AcceptAnswer::Rejected,
                certificate: AcceptCertificate::Cycle { cycle },
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ratio;
    use crate::revpref::dominance_flags;

    fn ds(pairs: &[(&[i64], &[i64])]) -> IndividualDataset {
        IndividualDataset::from_ints("a", pairs).unwrap()
    }

    fn v(xs: &[i64]) -> RVector {
        RVector::from_ints(xs)
    }

    #[test]
    fn direct_strict_preference_is_robust() {
        let d = ds(&[(&[1, 1], &[1, 1])]);
        let ybar = RVector::new(vec![ratio(1, 2), ratio(1, 2)]);
        let verdict = rank_robust(&d, &v(&[2, 2]), &ybar).unwrap();
        assert_eq!(verdict.answer, RankAnswer::RobustlyBetter);
        let terms = verdict.terms.unwrap();
        assert_eq!(terms.len(), 1);
        assert_eq!(terms[0].bundle, v(&[2, 2]));
        assert_eq!(terms[0].weight, int(1));
    }

    #[test]
    fn empty_data_is_not_robust_unless_dominant() {
        let d = IndividualDataset::empty("e", 2).unwrap();
        let verdict = rank_robust(&d, &v(&[1, 2]), &v(&[2, 1])).unwrap();
        assert_eq!(verdict.answer, RankAnswer::NotRobust);
        let (p, _, _) = varian_system(&d, &v(&[1, 2]), &v(&[2, 1]));
        assert!(p.is_witness(verdict.price.as_ref().unwrap()));
        assert!(p.is_witness(&RVector::ones(2)));

        let verdict = rank_robust(&d, &v(&[3, 3]), &v(&[1, 2])).unwrap();
        assert_eq!(verdict.answer, RankAnswer::RobustlyBetter);
    }

    #[test]
    fn identical_bundles_are_not_robust() {
        let d = ds(&[(&[1, 1], &[1, 1])]);
        let verdict = rank_robust(&d, &v(&[2, 1]), &v(&[2, 1])).unwrap();
        assert_eq!(verdict.answer, RankAnswer::NotRobust);
    }

    #[test]
    fn self_besting_cases() {
        assert!(!self_besting(&IndividualDataset::empty("e", 2).unwrap(), &v(&[1, 1])).unwrap());
        let d = ds(&[(&[2, 1], &[1, 2]), (&[1, 2], &[2, 1])]);
        assert!(!self_besting(&d, &v(&[1, 2])).unwrap());
        // Each observation is strictly revealed preferred to the other and
        // to their midpoint.
        let d = ds(&[(&[2, 1], &[1, 0]), (&[1, 2], &[0, 1])]);
        let xbar = RVector::new(vec![ratio(1, 2), ratio(1, 2)]);
        let flags = dominance_flags(&d, &xbar, &[&v(&[1, 0]), &v(&[0, 1])]).unwrap();
        assert!(flags.iter().all(|&(w, s)| w && s));
        assert!(self_besting(&d, &xbar).unwrap());
        let verdict = rank_robust(&d, &xbar, &v(&[0, 0])).unwrap();
        assert_eq!(verdict.answer, RankAnswer::SelfBesting);
        let w: Vec<(RVector, Rational)> = verdict
            .terms
            .unwrap()
            .iter()
            .map(|t| (t.bundle.clone(), t.weight.clone()))
            .collect();
        assert!(verify_besting(&d, &xbar, &xbar, &w, Mode::Strict).unwrap());
    }

    #[test]
    fn dominating_bundle_is_acceptable() {
        let d = ds(&[(&[2, 1], &[1, 2]), (&[1, 2], &[2, 1])]);
        let verdict = acceptable_top(&d, &v(&[3, 3])).unwrap();
        assert_eq!(verdict.answer, AcceptAnswer::Acceptable);
        let AcceptCertificate::Top { price, numbers } = verdict.certificate else {
            panic!("expected top certificate")
        };
        let aug = d
            .with_observation(Observation::new(price, v(&[3, 3])))
            .unwrap();
        assert!(numbers.satisfies(&aug));
        assert!(numbers.levels[..2].iter().all(|u| u <= &numbers.levels[2]));
    }

    #[test]
    fn empty_data_accepts_anything() {
        let d = IndividualDataset::empty("e", 3).unwrap();
        assert_eq!(
            acceptable_top(&d, &v(&[0, 1, 0])).unwrap().answer,
            AcceptAnswer::Acceptable
        );
    }

    #[test]
    fn zero_bundle_is_rejected_with_a_cycle() {
        let d = ds(&[(&[1, 1], &[1, 1])]);
        let verdict = acceptable_top(&d, &v(&[0, 0])).unwrap();
        assert_eq!(verdict.answer, AcceptAnswer::Rejected);
        let AcceptCertificate::Cycle { cycle } = verdict.certificate else {
            panic!("expected a cycle, got {:?}", verdict.certificate)
        };
        assert!(cycle.holds_in(&top_relation(&d, &v(&[0, 0]))));
        assert!(cycle.nodes.contains(&1));
    }

    #[test]
    fn inconsistent_data_is_rejected_with_its_own_cycle() {
        let d = ds(&[(&[2, 1], &[1, 0]), (&[1, 2], &[0, 1])]);
        let verdict = acceptable_top(&d, &v(&[5, 5])).unwrap();
        assert_eq!(verdict.answer, AcceptAnswer::Rejected);
        let AcceptCertificate::Cycle { cycle } = verdict.certificate else {
            panic!("expected a cycle")
        };
        assert!(cycle.nodes.iter().all(|&n| n < 2));
        assert!(cycle.holds_in(&top_relation(&d, &v(&[5, 5]))));
    }
}
