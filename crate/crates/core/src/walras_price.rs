//! Can a given price vector be a Walrasian equilibrium price for the
//! observed consumers and given endowments?
//!
//! The price `p̄` acts as a partial observation for each agent: whatever
//! the agent buys at income `I_i = p̄·ω_i` is revealed preferred to every
//! observed bundle it could afford, and through the closure to everything
//! below those.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::afriat::rationalize;
use crate::collective::AgentNumbers;
use crate::feasibility::{solve, FeasibilityOutcome, FeasibilityProblem, RowKind, RowRef};
use crate::model::{
    Allocation, EndowmentProfile, GroupDataset, IndividualDataset, ModelError, Observation,
};
use crate::numerics::{int, RVector, Rational};
use crate::revpref::{check_garp, closed_relation, GarpCycle};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PriceError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("price must be nonnegative and nonzero with {expected} coordinates")]
    BadPrice { expected: usize },
    #[error("agent {agent:?} observation {observation} has zero income")]
    ZeroIncome { agent: String, observation: usize },
    #[error("agent {agent:?} is not rationalizable")]
    NotRationalizable { agent: String, cycle: GarpCycle },
    #[error("price is not consistent with the data of agent {0:?}")]
    Inconsistent(String),
    #[error("could not assemble a certificate from the dual solution: {0}")]
    Construction(String),
}

/// Observations empirically worse than consumption at `p̄`, in index order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorseSet {
    pub agent: String,
    pub members: Vec<usize>,
    /// `strict[j]` refers to `members[j]`.
    pub strict: Vec<bool>,
}

impl WorseSet {
    pub fn contains(&self, k: usize) -> bool {
        self.members.contains(&k)
    }

    pub fn is_strict(&self, k: usize) -> bool {
        self.members
            .iter()
            .position(|&m| m == k)
            .is_some_and(|j| self.strict[j])
    }
}

fn worse_set(d: &IndividualDataset, pbar: &RVector, income: &Rational) -> WorseSet {
    let g = closed_relation(d, &[]).expect("observed carrier");
    let affordable: Vec<(usize, bool)> = d
        .observations()
        .iter()
        .enumerate()
        .filter_map(|(k, o)| {
            let c = pbar.dot(&o.bundle).expect("dimension checked");
            (&c <= income).then_some((k, &c < income))
        })
        .collect();
    let mut members = Vec::new();
    let mut strict = Vec::new();
    for k in 0..d.len() {
        let reach = affordable.iter().filter(|(a, _)| g.weak(*a, k));
        let mut any = false;
        let mut s = false;
        for &(a, sa) in reach {
            any = true;
            s |= sa || g.strict(a, k);
        }
        if any {
            members.push(k);
            strict.push(s);
        }
    }
    WorseSet {
        agent: d.id().to_string(),
        members,
        strict,
    }
}

fn check_price(g: &GroupDataset, pbar: &RVector) -> Result<(), PriceError> {
    if pbar.len() != g.dim() || !pbar.is_nonnegative() || pbar.is_zero() {
        return Err(PriceError::BadPrice { expected: g.dim() });
    }
    Ok(())
}

/// `L_i` for every agent, in group order.
pub fn worse_sets(
    g: &GroupDataset,
    omega: &EndowmentProfile,
    pbar: &RVector,
) -> Result<Vec<WorseSet>, PriceError> {
    check_price(g, pbar)?;
    omega.validate_for(g, "endowments")?;
    Ok(g.agents()
        .iter()
        .map(|d| {
            let income = pbar.dot(omega.bundle(d.id())).expect("validated");
            worse_set(d, pbar, &income)
        })
        .collect())
}

/// Rows `p^k·x ≥ I^k t` (strict for strict members unless `weaken`) over
/// bundle columns `x` and the shared normalization column `t`.
fn worse_rows(
    p: &mut FeasibilityProblem,
    d: &IndividualDataset,
    l: &WorseSet,
    x: &[usize],
    t: usize,
    weaken: bool,
) -> Vec<(usize, RowRef)> {
    l.members
        .iter()
        .zip(&l.strict)
        .map(|(&k, &s)| {
            let o = d.obs(k);
            let mut terms: Vec<(usize, Rational)> =
                x.iter().copied().zip(o.price.iter().cloned()).collect();
            terms.push((t, -o.income()));
            let kind = if s && !weaken {
                RowKind::Strict
            } else {
                RowKind::Weak
            };
            let row = p
                .add_sparse(kind, format!("worse x{} agent {}", k + 1, d.id()), &terms)
                .expect("fresh label");
            (k, row)
        })
        .collect()
}

fn agent_consistent(
    d: &IndividualDataset,
    l: &WorseSet,
    pbar: &RVector,
    income: &Rational,
) -> Option<RVector> {
    if !check_garp(d).passes() {
        return None;
    }
    let mut columns: Vec<String> = (1..=d.dim()).map(|m| format!("x{m}")).collect();
    columns.push("t".into());
    let mut p = FeasibilityProblem::new(columns);
    let x: Vec<usize> = (0..d.dim()).collect();
    let t = d.dim();
    worse_rows(&mut p, d, l, &x, t, false);
    let mut budget: Vec<(usize, Rational)> = x.iter().copied().zip(pbar.iter().cloned()).collect();
    budget.push((t, -income.clone()));
    p.add_weak("budget", &budget).expect("fresh label");
    let neg: Vec<(usize, Rational)> = budget.iter().map(|(c, a)| (*c, -a.clone())).collect();
    p.add_weak("budget reversed", &neg).expect("fresh label");
    for (m, &c) in x.iter().enumerate() {
        p.add_weak(format!("x{} >= 0", m + 1), &[(c, int(1))])
            .expect("fresh label");
    }
    p.add_strict("t > 0", &[(t, int(1))]).expect("fresh label");
    match solve(&p) {
        FeasibilityOutcome::Primal(w) => {
            let v = w.v.into_entries();
            Some(RVector::new(v[..d.dim()].to_vec()).scale(&v[t].recip()))
        }
        FeasibilityOutcome::Dual(_) => None,
    }
}

/// Whether every agent has some bundle on its budget at `p̄` whose
/// addition to its data keeps GARP.
pub fn consistent_price(
    g: &GroupDataset,
    omega: &EndowmentProfile,
    pbar: &RVector,
) -> Result<bool, PriceError> {
    Ok(first_inconsistent(g, omega, pbar)?.is_none())
}

fn first_inconsistent(
    g: &GroupDataset,
    omega: &EndowmentProfile,
    pbar: &RVector,
) -> Result<Option<String>, PriceError> {
    let sets = worse_sets(g, omega, pbar)?;
    for (d, l) in g.agents().iter().zip(&sets) {
        let income = pbar.dot(omega.bundle(d.id())).expect("validated");
        if agent_consistent(d, l, pbar, &income).is_none() {
            return Ok(Some(d.id().to_string()));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "atom", content = "observation", rename_all = "snake_case")]
pub enum Atom {
    /// Observation `k` (0-based) in `L_i`: price `p^k`, income `I^k`.
    Observed(usize),
    /// Price `p̄`, income `I_i`.
    A,
    /// Zero price and income.
    B,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomWeight {
    pub atom: Atom,
    #[serde(with = "crate::numerics::rational_serde")]
    pub probability: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentMeasure {
    pub agent: String,
    pub atoms: Vec<AtomWeight>,
}

/// A price `q*` that every agent finds worse on average than `p̄` and its
/// worse set, yet that prices the aggregate endowment below total
/// expected income.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriceCert {
    pub price: RVector,
    pub measures: Vec<AgentMeasure>,
    /// `Σ_i E_{μ_i} Ĩ_i − q*·ω̄`.
    #[serde(with = "crate::numerics::rational_serde")]
    pub income_gap: Rational,
}

impl PriceCert {
    /// Check both conditions exactly. The income condition must be strict,
    /// unless some strictly worse observation carries positive probability,
    /// in which case equality also rules `p̄` out.
    pub fn verify(&self, g: &GroupDataset, omega: &EndowmentProfile, pbar: &RVector) -> bool {
        let Ok(sets) = worse_sets(g, omega, pbar) else {
            return false;
        };
        if self.measures.len() != g.len()
            || self.price.len() != g.dim()
            || !self.price.is_nonnegative()
        {
            return false;
        }
        let mut total = Rational::zero();
        let mut strict_mass = false;
        for ((d, l), mu) in g.agents().iter().zip(&sets).zip(&self.measures) {
            if mu.agent != d.id() {
                return false;
            }
            let income = pbar.dot(omega.bundle(d.id())).expect("validated");
            let mut mass = Rational::zero();
            let mut mean = RVector::zeros(g.dim());
            for a in &mu.atoms {
                if a.probability.is_negative() {
                    return false;
                }
                mass += &a.probability;
                match a.atom {
                    Atom::Observed(k) => {
                        if !l.contains(k) {
                            return false;
                        }
                        let o = d.obs(k);
                        mean.axpy(&a.probability, &o.price);
                        total += &a.probability * o.income();
                        strict_mass |= a.probability.is_positive() && l.is_strict(k);
                    }
                    Atom::A => {
                        mean.axpy(&a.probability, pbar);
                        total += &a.probability * &income;
                    }
                    Atom::B => {}
                }
            }
            if mass != int(1) || !self.price.ge_all(&mean) {
                return false;
            }
        }
        let gap = total
            - self
                .price
                .dot(&omega.total(g.dim()))
                .expect("dimension checked");
        gap == self.income_gap && (gap.is_positive() || (gap.is_zero() && strict_mass))
    }
}

/// Consumption at `p̄` that clears the market, with Afriat numbers for each
/// agent's data extended by `(p̄, x̄_i)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriceEquilibrium {
    pub allocation: Allocation,
    pub numbers: Vec<AgentNumbers>,
}

impl PriceEquilibrium {
    pub fn verify(&self, g: &GroupDataset, omega: &EndowmentProfile, pbar: &RVector) -> bool {
        if self.allocation.validate_for(g, "allocation").is_err()
            || omega.validate_for(g, "endowments").is_err()
        {
            return false;
        }
        if self.allocation.total(g.dim()) != omega.total(g.dim()) || self.numbers.len() != g.len() {
            return false;
        }
        g.agents().iter().zip(&self.numbers).all(|(d, n)| {
            let x = self.allocation.bundle(d.id());
            n.agent == d.id()
                && pbar.dot(x).ok() == pbar.dot(omega.bundle(d.id())).ok()
                && d.with_observation(Observation::new(pbar.clone(), x.clone()))
                    .is_ok_and(|aug| n.numbers.satisfies(&aug))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PriceAnswer {
    Yes,
    No,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriceVerdict {
    pub answer: PriceAnswer,
    pub equilibrium: Option<PriceEquilibrium>,
    pub certificate: Option<PriceCert>,
}

/// Bundle columns, worse-set rows and budget row of one agent.
type AgentRows = (Vec<usize>, Vec<(usize, RowRef)>, RowRef);

struct EquilibriumSystem {
    problem: FeasibilityProblem,
    agents: Vec<AgentRows>,
    clearing: Vec<(RowRef, RowRef)>,
    t: usize,
}

fn equilibrium_system(
    g: &GroupDataset,
    omega: &EndowmentProfile,
    pbar: &RVector,
    sets: &[WorseSet],
    weaken: bool,
) -> EquilibriumSystem {
    let mut columns = Vec::new();
    for d in g.agents() {
        for m in 1..=g.dim() {
            columns.push(format!("x{m} agent {}", d.id()));
        }
    }
    columns.push("t".into());
    let t = columns.len() - 1;
    let mut p = FeasibilityProblem::new(columns);
    let mut agents = Vec::new();
    for (i, (d, l)) in g.agents().iter().zip(sets).enumerate() {
        let x: Vec<usize> = (i * g.dim()..(i + 1) * g.dim()).collect();
        let rows = worse_rows(&mut p, d, l, &x, t, weaken);
        let income = pbar.dot(omega.bundle(d.id())).expect("validated");
        let mut terms: Vec<(usize, Rational)> =
            x.iter().copied().zip(pbar.iter().cloned()).collect();
        terms.push((t, -income));
        let budget = p
            .add_weak(format!("budget agent {}", d.id()), &terms)
            .expect("fresh label");
        for (m, &c) in x.iter().enumerate() {
            p.add_weak(format!("x{} agent {} >= 0", m + 1, d.id()), &[(c, int(1))])
                .expect("fresh label");
        }
        agents.push((x, rows, budget));
    }
    let total = omega.total(g.dim());
    let clearing = (0..g.dim())
        .map(|m| {
            let mut terms: Vec<(usize, Rational)> =
                agents.iter().map(|(x, _, _)| (x[m], int(1))).collect();
            terms.push((t, -total[m].clone()));
            let up = p
                .add_weak(format!("clearing {} up", m + 1), &terms)
                .expect("fresh label");
            let neg: Vec<(usize, Rational)> = terms.iter().map(|(c, a)| (*c, -a.clone())).collect();
            let down = p
                .add_weak(format!("clearing {} down", m + 1), &neg)
                .expect("fresh label");
            (up, down)
        })
        .collect();
    p.add_strict("t > 0", &[(t, int(1))]).expect("fresh label");
    EquilibriumSystem {
        problem: p,
        agents,
        clearing,
        t,
    }
}

/// The full system [`equilibrium_price`] solves, strict worse-set rows
/// included.
pub fn price_system(
    g: &GroupDataset,
    omega: &EndowmentProfile,
    pbar: &RVector,
) -> Result<FeasibilityProblem, PriceError> {
    check_price(g, pbar)?;
    omega.validate_for(g, "endowments")?;
    let sets = worse_sets(g, omega, pbar)?;
    Ok(equilibrium_system(g, omega, pbar, &sets, false).problem)
}

/// Can `p̄` be a Walrasian equilibrium price for endowments `ω` under some
/// increasing concave rationalizing utilities?
pub fn equilibrium_price(
    g: &GroupDataset,
    omega: &EndowmentProfile,
    pbar: &RVector,
) -> Result<PriceVerdict, PriceError> {
    check_price(g, pbar)?;
    omega.validate_for(g, "endowments")?;
    for d in g.agents() {
        if let Some(k) = d.observations().iter().position(|o| o.income().is_zero()) {
            return Err(PriceError::ZeroIncome {
                agent: d.id().to_string(),
                observation: k + 1,
            });
        }
        if let Some(cycle) = check_garp(d).cycle() {
            return Err(PriceError::NotRationalizable {
                agent: d.id().to_string(),
                cycle: cycle.clone(),
            });
        }
    }
    if let Some(agent) = first_inconsistent(g, omega, pbar)? {
        return Err(PriceError::Inconsistent(agent));
    }
    let sets = worse_sets(g, omega, pbar)?;
    // With strictness only on the normalization the dual weight of `t > 0`
    // is positive; only when that relaxation is feasible do the strict
    // worse-set rows come in.
    let relaxed = equilibrium_system(g, omega, pbar, &sets, true);
    let (sys, cert) = match solve(&relaxed.problem) {
        FeasibilityOutcome::Dual(c) => (relaxed, c),
        FeasibilityOutcome::Primal(_) => {
            let full = equilibrium_system(g, omega, pbar, &sets, false);
            match solve(&full.problem) {
                FeasibilityOutcome::Dual(c) => (full, c),
                FeasibilityOutcome::Primal(w) => {
                    return equilibrium_from(g, omega, pbar, &full, &w.v).map(|e| PriceVerdict {
                        answer: PriceAnswer::Yes,
                        equilibrium: Some(e),
                        certificate: None,
                    })
                }
            }
        }
    };
    let wsum = |rows: &[(usize, RowRef)]| {
        rows.iter()
            .map(|(_, r)| cert.weight(*r).clone())
            .sum::<Rational>()
    };
    let s = sys
        .agents
        .iter()
        .map(|(_, rows, budget)| wsum(rows) + cert.weight(*budget))
        .max()
        .unwrap_or_default();
    if !s.is_positive() {
        return Err(PriceError::Construction(
            "dual puts no weight on worse-set or budget rows".into(),
        ));
    }
    let beta = RVector::new(
        sys.clearing
            .iter()
            .map(|(up, down)| (cert.weight(*down) - cert.weight(*up)) / &s)
            .collect(),
    );
    let measures = g
        .agents()
        .iter()
        .zip(&sys.agents)
        .map(|(d, (_, rows, budget))| {
            let mut atoms: Vec<AtomWeight> = rows
                .iter()
                .filter(|(_, r)| cert.weight(*r).is_positive())
                .map(|(k, r)| AtomWeight {
                    atom: Atom::Observed(*k),
                    probability: cert.weight(*r) / &s,
                })
                .collect();
            let a = cert.weight(*budget) / &s;
            let b = int(1) - (wsum(rows) + cert.weight(*budget)) / &s;
            if a.is_positive() {
                atoms.push(AtomWeight {
                    atom: Atom::A,
                    probability: a,
                });
            }
            if b.is_positive() {
                atoms.push(AtomWeight {
                    atom: Atom::B,
                    probability: b,
                });
            }
            AgentMeasure {
                agent: d.id().to_string(),
                atoms,
            }
        })
        .collect();
    let pi = cert.weight(RowRef {
        kind: RowKind::Strict,
        index: sys.problem.strict_rows().len() - 1,
    });
    debug_assert_eq!(sys.problem.num_vars() - 1, sys.t);
    Ok(PriceVerdict {
        answer: PriceAnswer::No,
        equilibrium: None,
        certificate: Some(PriceCert {
            price: beta,
            measures,
            income_gap: pi / &s,
        }),
    })
}

fn equilibrium_from(
    g: &GroupDataset,
    omega: &EndowmentProfile,
    pbar: &RVector,
    sys: &EquilibriumSystem,
    v: &RVector,
) -> Result<PriceEquilibrium, PriceError> {
    let t = v[sys.t].recip();
    let bundles: Vec<RVector> = sys
        .agents
        .iter()
        .map(|(x, _, _)| RVector::new(x.iter().map(|&c| &v[c] * &t).collect()))
        .collect();
    let allocation = Allocation::from_group_order(g, bundles);
    debug_assert_eq!(allocation.total(g.dim()), omega.total(g.dim()));
    let numbers = g
        .agents()
        .iter()
        .map(|d| {
            let aug = d.with_observation(Observation::new(
                pbar.clone(),
                allocation.bundle(d.id()).clone(),
            ))?;
            let numbers = rationalize(&aug).map_err(|_| {
                PriceError::Construction(format!(
                    "agent {:?} rejects its equilibrium bundle",
                    d.id()
                ))
            })?;
            Ok(AgentNumbers {
                agent: d.id().to_string(),
                numbers,
            })
        })
        .collect::<Result<_, PriceError>>()?;
    Ok(PriceEquilibrium {
        allocation,
        numbers,
    })
}
