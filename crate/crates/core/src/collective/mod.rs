//! Group welfare: possible efficiency, the Kaldor sufficient condition,
//! Walrasian allocations, and envy-free rationalization.

mod envy;

pub use envy::{envy_free_rationalizable, envy_system, EnvyAnswer, EnvyValues, EnvyVerdict};

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::afriat::{
    augmented_afriat_rows, rationalize, AfriatNumbers, AugmentOptions, AugmentedRow,
    AugmentedRowKind, BlockColumns, Node,
};
use crate::feasibility::{
    decompose_cycles, solve, DualCertificate, FeasibilityOutcome, FeasibilityProblem, RowRef,
};
use crate::individual::{price_rows, strict_edge_rows, weighted_edges};
use crate::model::{
    Allocation, EndowmentProfile, GroupDataset, IndividualDataset, ModelError, Observation,
};
use crate::numerics::{int, RVector, Rational};
use crate::revpref::{check_garp, dominance_flags, term_combination, GarpCycle, Term, TermRole};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CollectiveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("agent {agent:?} is not rationalizable")]
    NotRationalizable { agent: String, cycle: GarpCycle },
    #[error("allocation total {allocated:?} differs from endowment total {endowed:?}")]
    Totals {
        allocated: RVector,
        endowed: RVector,
    },
    #[error("could not assemble a certificate from the dual solution: {0}")]
    Construction(String),
}

/// Price `q` together with, for every agent, Afriat numbers of its data
/// with the observation `(q, x̄_i)` appended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportingPrice {
    pub price: RVector,
    pub numbers: Vec<AgentNumbers>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentNumbers {
    pub agent: String,
    pub numbers: AfriatNumbers,
}

impl SupportingPrice {
    /// Check that `(q, x̄_i)` can be appended to every agent's data.
    pub fn verify(&self, g: &GroupDataset, xbar: &Allocation) -> bool {
        if !self.price.is_nonnegative() || self.price.is_zero() || self.price.len() != g.dim() {
            return false;
        }
        self.numbers.len() == g.len()
            && g.agents().iter().zip(&self.numbers).all(|(d, n)| {
                n.agent == d.id()
                    && xbar.get(d.id()).is_some_and(|x| {
                        d.with_observation(Observation::new(self.price.clone(), x.clone()))
                            .is_ok_and(|aug| n.numbers.satisfies(&aug))
                    })
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentDomination {
    pub agent: String,
    pub terms: Vec<Term>,
    /// `ȳ_i = Σ weight · bundle`.
    pub bundle: RVector,
}

/// A reallocation whose bundles dominate the agents' bundles in `x̄`,
/// weakly for all and strictly for `strict_agent`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominationCert {
    pub agents: Vec<AgentDomination>,
    pub strict_agent: String,
    /// Resource bound minus `Σ ȳ_i`; nonnegative.
    pub slack: RVector,
}

impl DominationCert {
    fn total(&self, dim: usize) -> RVector {
        self.agents
            .iter()
            .fold(RVector::zeros(dim), |acc, a| acc.add(&a.bundle))
    }

    /// Per-agent checks: convex weights, the stated bundle, every revealed
    /// term `⪰^I x̄_i`, endowment terms equal to `ω_i` (only when `omega`
    /// is given), and a strictly preferred term for the flagged agent.
    fn verify_agents(
        &self,
        g: &GroupDataset,
        xbar: &Allocation,
        omega: Option<&EndowmentProfile>,
    ) -> bool {
        if self.agents.len() != g.len() {
            return false;
        }
        let mut strict_seen = false;
        for (d, a) in g.agents().iter().zip(&self.agents) {
            let Some(x) = xbar.get(d.id()) else {
                return false;
            };
            if a.agent != d.id() || a.bundle.len() != g.dim() {
                return false;
            }
            if a.terms
                .iter()
                .any(|t| t.weight.is_negative() || t.bundle.len() != g.dim())
            {
                return false;
            }
            let sum: Rational = a.terms.iter().map(|t| &t.weight).sum();
            if sum != int(1) || term_combination(&a.terms, g.dim()) != a.bundle {
                return false;
            }
            let live: Vec<&Term> = a.terms.iter().filter(|t| t.weight.is_positive()).collect();
            let revealed: Vec<&RVector> = live
                .iter()
                .filter(|t| t.role == TermRole::Revealed)
                .map(|t| &t.bundle)
                .collect();
            for t in &live {
                if t.role == TermRole::Endowment
                    && omega.and_then(|w| w.get(d.id())) != Some(&t.bundle)
                {
                    return false;
                }
            }
            let Ok(flags) = dominance_flags(d, x, &revealed) else {
                return false;
            };
            if !flags.iter().all(|&(w, _)| w) {
                return false;
            }
            if a.agent == self.strict_agent {
                strict_seen = flags.iter().any(|&(_, s)| s);
            }
        }
        strict_seen
    }

    /// A valid empirical domination of `x̄`: `Σ ȳ_i ≤ Σ x̄_i`.
    pub fn verify(&self, g: &GroupDataset, xbar: &Allocation) -> bool {
        let bound = xbar.total(g.dim());
        self.verify_agents(g, xbar, None)
            && self.slack == bound.sub(&self.total(g.dim()))
            && self.slack.is_nonnegative()
    }

    /// A valid Kaldor witness: `Σ z̄_i ≤ Σ x̄_i + κ(Σ ȳ_i − Σ x̄_i)`, `κ ≥ 0`.
    pub fn verify_kaldor(
        &self,
        g: &GroupDataset,
        xbar: &Allocation,
        ybar: &Allocation,
        kappa: &Rational,
    ) -> bool {
        if kappa.is_negative() {
            return false;
        }
        let bound = kaldor_bound(g, xbar, ybar, kappa);
        self.verify_agents(g, xbar, None)
            && self.slack == bound.sub(&self.total(g.dim()))
            && self.slack.is_nonnegative()
    }

    /// A valid strict ω-domination: an allocation of the endowments.
    pub fn verify_walras(
        &self,
        g: &GroupDataset,
        omega: &EndowmentProfile,
        xbar: &Allocation,
    ) -> bool {
        self.verify_agents(g, xbar, Some(omega))
            && self.slack.is_zero()
            && self.total(g.dim()) == omega.total(g.dim())
    }
}

fn kaldor_bound(
    g: &GroupDataset,
    xbar: &Allocation,
    ybar: &Allocation,
    kappa: &Rational,
) -> RVector {
    let x = xbar.total(g.dim());
    x.add(&ybar.total(g.dim()).sub(&x).scale(kappa))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EfficiencyAnswer {
    PossiblyEfficient,
    Dominated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EfficiencyVerdict {
    pub answer: EfficiencyAnswer,
    pub support: Option<SupportingPrice>,
    pub domination: Option<DominationCert>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum KaldorAnswer {
    Sufficient,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KaldorVerdict {
    pub answer: KaldorAnswer,
    pub support: Option<SupportingPrice>,
    pub domination: Option<DominationCert>,
    #[serde(with = "crate::numerics::rational_serde")]
    pub kappa: Rational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WalrasAnswer {
    Yes,
    No,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalrasAllocationVerdict {
    pub answer: WalrasAnswer,
    pub support: Option<SupportingPrice>,
    pub domination: Option<DominationCert>,
}

/// Prices derived from a YES answer also balance every budget.
pub fn budgets_balance(
    price: &RVector,
    g: &GroupDataset,
    omega: &EndowmentProfile,
    xbar: &Allocation,
) -> bool {
    g.ids().all(|id| match (omega.get(id), xbar.get(id)) {
        (Some(w), Some(x)) => price.dot(w).ok() == price.dot(x).ok(),
        _ => false,
    })
}

pub(crate) struct AgentBlock {
    pub cols: BlockColumns,
    pub rows: Vec<AugmentedRow>,
}

/// The joint system of every agent's candidate-augmented Afriat rows with
/// shared price columns `q`.
pub(crate) struct GroupSystem {
    pub problem: FeasibilityProblem,
    pub q: Vec<usize>,
    pub blocks: Vec<AgentBlock>,
    pub m: Option<RowRef>,
}

pub(crate) fn check_inputs(g: &GroupDataset, xbar: &Allocation) -> Result<(), CollectiveError> {
    xbar.validate_for(g, "allocation")?;
    for d in g.agents() {
        if let Some(cycle) = check_garp(d).cycle() {
            return Err(CollectiveError::NotRationalizable {
                agent: d.id().to_string(),
                cycle: cycle.clone(),
            });
        }
    }
    Ok(())
}

impl GroupSystem {
    fn new(g: &GroupDataset, xbar: &Allocation) -> Self {
        let mut columns = Vec::new();
        let cols: Vec<BlockColumns> = g
            .agents()
            .iter()
            .map(|d| BlockColumns::allocate(&mut columns, d.id(), d.len()))
            .collect();
        let q: Vec<usize> = (1..=g.dim())
            .map(|j| {
                columns.push(format!("q{j}"));
                columns.len() - 1
            })
            .collect();
        let mut problem = FeasibilityProblem::new(columns);
        let blocks = g
            .agents()
            .iter()
            .zip(cols)
            .map(|(d, cols)| {
                let rows = augmented_afriat_rows(
                    &mut problem,
                    d,
                    xbar.bundle(d.id()),
                    &cols,
                    &q,
                    AugmentOptions {
                        support: true,
                        top: false,
                    },
                )
                .expect("inputs validated");
                AgentBlock { cols, rows }
            })
            .collect();
        GroupSystem {
            problem,
            q,
            blocks,
            m: None,
        }
    }

    /// Weak row `q·a ≥ 0` over the price columns.
    fn add_price_row(&mut self, label: String, a: &RVector) -> RowRef {
        let terms: Vec<(usize, Rational)> = self.q.iter().copied().zip(a.iter().cloned()).collect();
        self.problem.add_weak(label, &terms).expect("fresh label")
    }

    fn finish(mut self) -> Self {
        self.m = Some(price_rows(&mut self.problem, &self.q));
        self
    }

    fn price(&self, v: &RVector) -> RVector {
        RVector::new(self.q.iter().map(|&c| v[c].clone()).collect())
    }

    /// `θ^k_i`: dual weights of the support rows, per agent and observation.
    fn support_weights(&self, g: &GroupDataset, cert: &DualCertificate) -> Vec<Vec<Rational>> {
        self.blocks
            .iter()
            .zip(g.agents())
            .map(|(b, d)| {
                let mut theta = vec![Rational::zero(); d.len()];
                for r in &b.rows {
                    if let AugmentedRowKind::Support { k } = r.kind {
                        theta[k] = cert.weight(r.row).clone();
                    }
                }
                theta
            })
            .collect()
    }

    /// For Case 2: the first agent whose weighted cycles carry a strict
    /// edge, with the observation entered from `x̄_i` on that cycle.
    fn strict_chain(
        &self,
        g: &GroupDataset,
        cert: &DualCertificate,
    ) -> Result<Option<(usize, usize)>, CollectiveError> {
        for (i, (b, d)) in self.blocks.iter().zip(g.agents()).enumerate() {
            let strict = strict_edge_rows(&self.problem, &b.rows, &b.cols, cert);
            if strict.is_empty() {
                continue;
            }
            let edges = weighted_edges(&b.rows, cert, d.len());
            let cycles = decompose_cycles(&edges)
                .map_err(|e| CollectiveError::Construction(e.to_string()))?;
            if let Some(c) = cycles
                .iter()
                .find(|c| c.edges.iter().any(|e| strict.contains(e)))
            {
                let entry = c.edges.iter().find_map(|&e| match b.rows[e].kind.edge() {
                    Some((Node::Candidate, Node::Obs(k))) => Some(k),
                    _ => None,
                });
                return match entry {
                    Some(k) => Ok(Some((i, k))),
                    None => Err(CollectiveError::Construction(format!(
                        "strict cycle of agent {:?} avoids its candidate bundle",
                        d.id()
                    ))),
                };
            }
        }
        Ok(None)
    }
}

fn supporting_price(
    g: &GroupDataset,
    xbar: &Allocation,
    q: RVector,
) -> Result<SupportingPrice, CollectiveError> {
    let numbers = g
        .agents()
        .iter()
        .map(|d| {
            let aug =
                d.with_observation(Observation::new(q.clone(), xbar.bundle(d.id()).clone()))?;
            let numbers = rationalize(&aug).map_err(|_| {
                CollectiveError::Construction(format!(
                    "agent {:?} rejects the supporting price",
                    d.id()
                ))
            })?;
            Ok(AgentNumbers {
                agent: d.id().to_string(),
                numbers,
            })
        })
        .collect::<Result<_, CollectiveError>>()?;
    Ok(SupportingPrice { price: q, numbers })
}

/// Terms `θ^k_i/T · x^k_i`, `α_i/T · ω_i` and the residual on `x̄_i`.
fn agent_terms(
    d: &IndividualDataset,
    theta: &[Rational],
    alpha: &Rational,
    omega: Option<&RVector>,
    xbar: &RVector,
    t: &Rational,
) -> Vec<Term> {
    let mut terms: Vec<Term> = theta
        .iter()
        .enumerate()
        .filter(|(_, w)| w.is_positive())
        .map(|(k, w)| Term::new(format!("x{}", k + 1), d.obs(k).bundle.clone(), w / t))
        .collect();
    if alpha.is_positive() {
        terms.push(Term::endowment(
            omega.expect("endowment weight needs an endowment").clone(),
            alpha / t,
        ));
    }
    let used: Rational = theta.iter().sum::<Rational>() + alpha;
    let rest = int(1) - used / t;
    if rest.is_positive() {
        terms.push(Term::new("xbar", xbar.clone(), rest));
    }
    terms
}

/// Shift the bundle of `terms[idx]` so the combination moves by `delta`.
fn shift_term(terms: &mut [Term], idx: usize, delta: &RVector) {
    let t = &mut terms[idx];
    t.bundle = t.bundle.add(&delta.scale(&t.weight.recip()));
    t.label.push('+');
}

/// Index of the term to perturb for a Case 1 strict agent: `x̄_i` when
/// it carries weight, else its first observed bundle.
fn perturb_index(terms: &[Term]) -> Option<usize> {
    terms
        .iter()
        .position(|t| t.label == "xbar")
        .or_else(|| terms.iter().position(|t| t.role == TermRole::Revealed))
}

fn assemble(
    g: &GroupDataset,
    terms: Vec<Vec<Term>>,
    strict_agent: usize,
    bound: &RVector,
) -> DominationCert {
    let agents: Vec<AgentDomination> = g
        .agents()
        .iter()
        .zip(terms)
        .map(|(d, terms)| AgentDomination {
            agent: d.id().to_string(),
            bundle: term_combination(&terms, g.dim()),
            terms,
        })
        .collect();
    let total = agents
        .iter()
        .fold(RVector::zeros(g.dim()), |acc, a| acc.add(&a.bundle));
    DominationCert {
        agents,
        strict_agent: g.agents()[strict_agent].id().to_string(),
        slack: bound.sub(&total),
    }
}

/// Build the domination certificate from a dual solution of the
/// efficiency (or Kaldor) system. `bound` is the resource bound whose
/// difference with the normalized combination is nonnegative.
fn domination_from_dual(
    g: &GroupDataset,
    xbar: &Allocation,
    sys: &GroupSystem,
    cert: &DualCertificate,
    bound: &RVector,
) -> Result<DominationCert, CollectiveError> {
    let theta = sys.support_weights(g, cert);
    let s = theta
        .iter()
        .map(|t| t.iter().sum::<Rational>())
        .max()
        .unwrap_or_default();
    if !s.is_positive() {
        return Err(CollectiveError::Construction(
            "dual puts no weight on support rows".into(),
        ));
    }
    let zero = Rational::zero();
    let mut terms: Vec<Vec<Term>> = g
        .agents()
        .iter()
        .zip(&theta)
        .map(|(d, th)| agent_terms(d, th, &zero, None, xbar.bundle(d.id()), &s))
        .collect();
    let m = cert.weight(sys.m.expect("finished system"));
    if m.is_positive() {
        // No perturbation needed if some agent already has a strict term.
        for (i, (d, t)) in g.agents().iter().zip(&terms).enumerate() {
            let live: Vec<&RVector> = t
                .iter()
                .filter(|t| t.weight.is_positive())
                .map(|t| &t.bundle)
                .collect();
            let flags = dominance_flags(d, xbar.bundle(d.id()), &live)
                .map_err(|e| CollectiveError::Construction(e.to_string()))?;
            if flags.iter().any(|&(_, s)| s) {
                return Ok(assemble(g, terms, i, bound));
            }
        }
        // Aggregate slack is ≫ 0; spend half of it making one agent strict.
        let i = theta
            .iter()
            .position(|t| t.iter().any(|w| w.is_positive()))
            .expect("some agent has support weight");
        let provisional = assemble(g, terms.clone(), i, bound);
        let idx = perturb_index(&terms[i]).expect("agent has support weight");
        let min = provisional
            .slack
            .min_entry()
            .expect("positive dimension")
            .clone();
        let eps = min / int(2);
        shift_term(&mut terms[i], idx, &RVector::constant(g.dim(), &eps));
        return Ok(assemble(g, terms, i, bound));
    }
    match sys.strict_chain(g, cert)? {
        Some((i, _)) => Ok(assemble(g, terms, i, bound)),
        None => Err(CollectiveError::Construction(
            "dual has no strict component".into(),
        )),
    }
}

fn kaldor_group(g: &GroupDataset, xbar: &Allocation, ybar: &Allocation) -> (GroupSystem, RowRef) {
    let mut sys = GroupSystem::new(g, xbar);
    let gap = xbar.total(g.dim()).sub(&ybar.total(g.dim()));
    let kappa_row = sys.add_price_row("kaldor".into(), &gap);
    (sys.finish(), kappa_row)
}

fn walras_group(
    g: &GroupDataset,
    omega: &EndowmentProfile,
    xbar: &Allocation,
) -> (GroupSystem, Vec<RowRef>) {
    let mut sys = GroupSystem::new(g, xbar);
    let budget_rows: Vec<RowRef> = g
        .agents()
        .iter()
        .map(|d| {
            let a = omega.bundle(d.id()).sub(xbar.bundle(d.id()));
            sys.add_price_row(format!("budget agent {}", d.id()), &a)
        })
        .collect();
    (sys.finish(), budget_rows)
}

/// The system [`possibly_efficient`] solves.
pub fn efficiency_system(
    g: &GroupDataset,
    xbar: &Allocation,
) -> Result<FeasibilityProblem, CollectiveError> {
    check_inputs(g, xbar)?;
    Ok(GroupSystem::new(g, xbar).finish().problem)
}

/// The system [`kaldor_undominated`] solves.
pub fn kaldor_system(
    g: &GroupDataset,
    xbar: &Allocation,
    ybar: &Allocation,
) -> Result<FeasibilityProblem, CollectiveError> {
    check_inputs(g, xbar)?;
    ybar.validate_for(g, "comparison allocation")?;
    Ok(kaldor_group(g, xbar, ybar).0.problem)
}

/// The system [`walrasian_allocation`] solves.
pub fn walras_system(
    g: &GroupDataset,
    omega: &EndowmentProfile,
    xbar: &Allocation,
) -> Result<FeasibilityProblem, CollectiveError> {
    check_inputs(g, xbar)?;
    omega.validate_for(g, "endowments")?;
    Ok(walras_group(g, omega, xbar).0.problem)
}

/// Can `x̄` be Pareto efficient for some increasing concave rationalizing
/// utilities?
pub fn possibly_efficient(
    g: &GroupDataset,
    xbar: &Allocation,
) -> Result<EfficiencyVerdict, CollectiveError> {
    check_inputs(g, xbar)?;
    let sys = GroupSystem::new(g, xbar).finish();
    match solve(&sys.problem) {
        FeasibilityOutcome::Primal(w) => Ok(EfficiencyVerdict {
            answer: EfficiencyAnswer::PossiblyEfficient,
            support: Some(supporting_price(g, xbar, sys.price(&w.v))?),
            domination: None,
        }),
        FeasibilityOutcome::Dual(cert) => Ok(EfficiencyVerdict {
            answer: EfficiencyAnswer::Dominated,
            support: None,
            domination: Some(domination_from_dual(
                g,
                xbar,
                &sys,
                &cert,
                &xbar.total(g.dim()),
            )?),
        }),
    }
}

/// A dual living on the price rows alone says `Σ ȳ ≫ Σ x̄`. Then with
/// `κ = 1` everyone keeps `x̄_i` and the first agent also gets the surplus.
fn kaldor_by_surplus(
    g: &GroupDataset,
    xbar: &Allocation,
    ybar: &Allocation,
) -> Result<KaldorVerdict, CollectiveError> {
    let surplus = ybar.total(g.dim()).sub(&xbar.total(g.dim()));
    if g.is_empty() || !surplus.gg_all(&RVector::zeros(g.dim())) {
        return Err(CollectiveError::Construction(
            "dual puts no weight on support rows".into(),
        ));
    }
    let mut terms: Vec<Vec<Term>> = g
        .agents()
        .iter()
        .map(|d| vec![Term::new("xbar", xbar.bundle(d.id()).clone(), int(1))])
        .collect();
    shift_term(&mut terms[0], 0, &surplus);
    let kappa = int(1);
    Ok(KaldorVerdict {
        answer: KaldorAnswer::Inconclusive,
        support: None,
        domination: Some(assemble(g, terms, 0, &kaldor_bound(g, xbar, ybar, &kappa))),
        kappa,
    })
}

/// Sufficient condition for some increasing concave rationalizing
/// utilities to make `x̄` weakly Kaldor dominate `ȳ`.
pub fn kaldor_undominated(
    g: &GroupDataset,
    xbar: &Allocation,
    ybar: &Allocation,
) -> Result<KaldorVerdict, CollectiveError> {
    check_inputs(g, xbar)?;
    ybar.validate_for(g, "comparison allocation")?;
    let (sys, kappa_row) = kaldor_group(g, xbar, ybar);
    match solve(&sys.problem) {
        FeasibilityOutcome::Primal(w) => Ok(KaldorVerdict {
            answer: KaldorAnswer::Sufficient,
            support: Some(supporting_price(g, xbar, sys.price(&w.v))?),
            domination: None,
            kappa: Rational::zero(),
        }),
        FeasibilityOutcome::Dual(cert) => {
            let s = sys
                .support_weights(g, &cert)
                .iter()
                .map(|t| t.iter().sum::<Rational>())
                .max()
                .unwrap_or_default();
            if !s.is_positive() {
                return kaldor_by_surplus(g, xbar, ybar);
            }
            let kappa = cert.weight(kappa_row) / &s;
            let bound = kaldor_bound(g, xbar, ybar, &kappa);
            Ok(KaldorVerdict {
                answer: KaldorAnswer::Inconclusive,
                support: None,
                domination: Some(domination_from_dual(g, xbar, &sys, &cert, &bound)?),
                kappa,
            })
        }
    }
}

/// Is `x̄`, an allocation of the endowments `ω`, a Walrasian equilibrium
/// allocation for some increasing concave rationalizing utilities?
pub fn walrasian_allocation(
    g: &GroupDataset,
    omega: &EndowmentProfile,
    xbar: &Allocation,
) -> Result<WalrasAllocationVerdict, CollectiveError> {
    check_inputs(g, xbar)?;
    omega.validate_for(g, "endowments")?;
    let (allocated, endowed) = (xbar.total(g.dim()), omega.total(g.dim()));
    if allocated != endowed {
        return Err(CollectiveError::Totals { allocated, endowed });
    }
    let (sys, budget_rows) = walras_group(g, omega, xbar);
    let cert = match solve(&sys.problem) {
        FeasibilityOutcome::Primal(w) => {
            return Ok(WalrasAllocationVerdict {
                answer: WalrasAnswer::Yes,
                support: Some(supporting_price(g, xbar, sys.price(&w.v))?),
                domination: None,
            })
        }
        FeasibilityOutcome::Dual(cert) => cert,
    };
    let theta = sys.support_weights(g, &cert);
    let alpha: Vec<Rational> = budget_rows
        .iter()
        .map(|&r| cert.weight(r).clone())
        .collect();
    let t = theta
        .iter()
        .zip(&alpha)
        .map(|(th, a)| th.iter().sum::<Rational>() + a)
        .max()
        .unwrap_or_default();
    if !t.is_positive() {
        return Err(CollectiveError::Construction(
            "dual puts no weight on support or budget rows".into(),
        ));
    }
    let mut terms: Vec<Vec<Term>> = g
        .agents()
        .iter()
        .zip(theta.iter().zip(&alpha))
        .map(|(d, (th, a))| {
            agent_terms(
                d,
                th,
                a,
                Some(omega.bundle(d.id())),
                xbar.bundle(d.id()),
                &t,
            )
        })
        .collect();
    let provisional = assemble(g, terms.clone(), 0, &endowed);
    let slack = provisional.slack.clone();
    // The strict agent's non-endowment term absorbs the whole slack, so the
    // reallocation uses exactly the endowments.
    let (i, idx) = if cert.weight(sys.m.expect("finished system")).is_positive() {
        let i = terms
            .iter()
            .position(|ts| perturb_index(ts).is_some())
            .ok_or_else(|| {
                CollectiveError::Construction("every agent keeps only its endowment".into())
            })?;
        (i, perturb_index(&terms[i]).expect("checked"))
    } else {
        let (i, k) = sys
            .strict_chain(g, &cert)?
            .ok_or_else(|| CollectiveError::Construction("dual has no strict component".into()))?;
        let label = format!("x{}", k + 1);
        let idx = terms[i]
            .iter()
            .position(|t| t.label == label && t.role == TermRole::Revealed)
            .ok_or_else(|| {
                CollectiveError::Construction("strict chain starts at an unweighted bundle".into())
            })?;
        (i, idx)
    };
    if !slack.is_zero() {
        shift_term(&mut terms[i], idx, &slack);
    }
    Ok(WalrasAllocationVerdict {
        answer: WalrasAnswer::No,
        support: None,
        domination: Some(assemble(g, terms, i, &endowed)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ratio;

    fn v(xs: &[i64]) -> RVector {
        RVector::from_ints(xs)
    }

    /// Agent 1 has no data; agent 2 has four observations.
    pub(crate) fn example_group() -> GroupDataset {
        GroupDataset::new(vec![
            IndividualDataset::empty("1", 2).unwrap(),
            IndividualDataset::from_ints(
                "2",
                &[
                    (&[2, 1], &[1, 2]),
                    (&[2, 1], &[0, 4]),
                    (&[1, 2], &[2, 1]),
                    (&[1, 2], &[4, 0]),
                ],
            )
            .unwrap(),
        ])
        .unwrap()
    }

    pub(crate) fn mirrored_group() -> GroupDataset {
        GroupDataset::new(vec![
            IndividualDataset::from_ints("1", &[(&[1, 2], &[2, 1])]).unwrap(),
            IndividualDataset::from_ints("2", &[(&[2, 1], &[1, 2])]).unwrap(),
        ])
        .unwrap()
    }

    pub(crate) fn dominated_allocation(g: &GroupDataset) -> Allocation {
        Allocation::from_group_order(
            g,
            vec![
                RVector::new(vec![ratio(29, 10), ratio(1, 2)]),
                RVector::new(vec![ratio(1, 2), ratio(29, 10)]),
            ],
        )
    }

    #[test]
    fn example_allocations_are_possibly_efficient() {
        let g = example_group();
        for (a, b) in [(v(&[1, 0]), v(&[0, 4])), (v(&[0, 1]), v(&[4, 0]))] {
            let x = Allocation::from_group_order(&g, vec![a, b]);
            let verdict = possibly_efficient(&g, &x).unwrap();
            assert_eq!(verdict.answer, EfficiencyAnswer::PossiblyEfficient);
            assert!(verdict.support.unwrap().verify(&g, &x));
        }
    }

    #[test]
    fn mirrored_agents_are_dominated() {
        let g = mirrored_group();
        let x = dominated_allocation(&g);
        let verdict = possibly_efficient(&g, &x).unwrap();
        assert_eq!(verdict.answer, EfficiencyAnswer::Dominated);
        let cert = verdict.domination.unwrap();
        assert!(cert.verify(&g, &x), "{cert:?}");
        assert!(cert.slack.is_nonnegative());
    }

    #[test]
    fn kaldor_reduces_to_efficiency() {
        let g = example_group();
        let x = Allocation::from_group_order(&g, vec![v(&[1, 0]), v(&[0, 4])]);
        let verdict = kaldor_undominated(&g, &x, &x).unwrap();
        assert_eq!(verdict.answer, KaldorAnswer::Sufficient);

        let g = mirrored_group();
        let x = dominated_allocation(&g);
        for y in [
            x.clone(),
            Allocation::from_group_order(&g, vec![v(&[0, 0]), v(&[5, 5])]),
        ] {
            let verdict = kaldor_undominated(&g, &x, &y).unwrap();
            assert_eq!(verdict.answer, KaldorAnswer::Inconclusive);
            assert!(verdict
                .domination
                .unwrap()
                .verify_kaldor(&g, &x, &y, &verdict.kappa));
        }
    }

    #[test]
    fn larger_comparison_total_is_inconclusive() {
        let g = mirrored_group();
        let x = Allocation::from_group_order(&g, vec![v(&[2, 1]), v(&[1, 2])]);
        let y = dominated_allocation(&g);
        let verdict = kaldor_undominated(&g, &x, &y).unwrap();
        assert_eq!(verdict.answer, KaldorAnswer::Inconclusive);
        assert_eq!(verdict.kappa, int(1));
        let cert = verdict.domination.unwrap();
        assert!(cert.verify_kaldor(&g, &x, &y, &verdict.kappa));
        assert!(cert.slack.is_zero());
    }

    #[test]
    fn observed_choice_is_an_equilibrium() {
        let g = GroupDataset::new(vec![IndividualDataset::from_ints(
            "a",
            &[(&[1, 2], &[3, 1])],
        )
        .unwrap()])
        .unwrap();
        let x = Allocation::from_group_order(&g, vec![v(&[3, 1])]);
        let verdict = walrasian_allocation(&g, &x, &x).unwrap();
        assert_eq!(verdict.answer, WalrasAnswer::Yes);
        let support = verdict.support.unwrap();
        assert!(support.verify(&g, &x));
        assert!(budgets_balance(&support.price, &g, &x, &x));
        // The observed price itself works too.
        let own = SupportingPrice {
            price: v(&[1, 2]),
            numbers: vec![AgentNumbers {
                agent: "a".into(),
                numbers: rationalize(
                    &g.agents()[0]
                        .with_observation(Observation::new(v(&[1, 2]), v(&[3, 1])))
                        .unwrap(),
                )
                .unwrap(),
            }],
        };
        assert!(own.verify(&g, &x));
    }

    #[test]
    fn dominated_allocation_is_not_walrasian() {
        let g = mirrored_group();
        let x = dominated_allocation(&g);
        let verdict = walrasian_allocation(&g, &x, &x).unwrap();
        assert_eq!(verdict.answer, WalrasAnswer::No);
        assert!(verdict.domination.unwrap().verify_walras(&g, &x, &x));
    }

    #[test]
    fn empty_agents_trade_nothing() {
        let g = GroupDataset::new(vec![
            IndividualDataset::empty("a", 2).unwrap(),
            IndividualDataset::empty("b", 2).unwrap(),
        ])
        .unwrap();
        let w = Allocation::from_group_order(&g, vec![v(&[1, 3]), v(&[2, 0])]);
        let verdict = walrasian_allocation(&g, &w, &w).unwrap();
        assert_eq!(verdict.answer, WalrasAnswer::Yes);
        assert!(budgets_balance(&v(&[1, 1]), &g, &w, &w));
    }

    #[test]
    fn totals_must_match() {
        let g = mirrored_group();
        let x = dominated_allocation(&g);
        let w = Allocation::from_group_order(&g, vec![v(&[1, 1]), v(&[1, 1])]);
        assert!(matches!(
            walrasian_allocation(&g, &w, &x),
            Err(CollectiveError::Totals { .. })
        ));
    }

    #[test]
    fn inconsistent_agent_is_an_error() {
        let g = GroupDataset::new(vec![IndividualDataset::from_ints(
            "bad",
            &[(&[2, 1], &[1, 0]), (&[1, 2], &[0, 1])],
        )
        .unwrap()])
        .unwrap();
        let x = Allocation::from_group_order(&g, vec![v(&[1, 1])]);
        assert!(matches!(
            possibly_efficient(&g, &x),
            Err(CollectiveError::NotRationalizable { .. })
        ));
    }

    #[test]
    fn tampered_certificates_fail() {
        let g = mirrored_group();
        let x = dominated_allocation(&g);
        let mut cert = possibly_efficient(&g, &x).unwrap().domination.unwrap();
        cert.agents[0].terms[0].weight += ratio(1, 100);
        assert!(!cert.verify(&g, &x));
    }
}
