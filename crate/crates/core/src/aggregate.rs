//! Representative consumer: when individual and aggregate demand data are
//! all rationalizable and one agent is small, the small agent's utility can
//! double as the representative consumer's.

use serde::{Deserialize, Serialize};

use crate::afriat::{build_utility, rationalize, AfriatError, AfriatNumbers};
use crate::collective::AgentNumbers;
use crate::model::{aggregate_dataset, GroupDataset, IndividualDataset};
use crate::numerics::{int, RVector, Rational};
use crate::revpref::{check_garp, GarpCycle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RepAnswer {
    Representable,
    NotRepresentable,
    HypothesisFailed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypotheses {
    pub equal_lengths: bool,
    pub common_prices: bool,
    /// Agents whose every bundle is below every aggregate bundle.
    pub small_agents: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedDataset {
    /// Agent id, or `aggregate`.
    pub dataset: String,
    pub cycle: GarpCycle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepConsumerVerdict {
    pub answer: RepAnswer,
    pub hypotheses: Hypotheses,
    pub small_agent: Option<String>,
    /// Afriat numbers for the small agent's data followed by the aggregate
    /// data; the utility they build serves both.
    pub shared: Option<AfriatNumbers>,
    pub others: Vec<AgentNumbers>,
    pub failure: Option<FailedDataset>,
    pub reason: Option<String>,
}

/// Small agent's observations followed by the aggregate observations.
pub fn union_dataset(g: &GroupDataset, small: &str) -> Option<IndividualDataset> {
    let agg = aggregate_dataset(g).ok()?;
    IndividualDataset::union("union", g.agent(small)?, &agg).ok()
}

fn hypotheses(g: &GroupDataset) -> Hypotheses {
    let agents = g.agents();
    let k = agents[0].len();
    let equal_lengths = agents.iter().all(|d| d.len() == k);
    let common_prices = equal_lengths
        && (0..k).all(|j| {
            agents
                .iter()
                .all(|d| d.obs(j).price == agents[0].obs(j).price)
        });
    let small_agents = if equal_lengths {
        let totals: Vec<RVector> = (0..k)
            .map(|j| {
                agents
                    .iter()
                    .fold(RVector::zeros(g.dim()), |acc, d| acc.add(&d.obs(j).bundle))
            })
            .collect();
        let mut ids: Vec<String> = agents
            .iter()
            .filter(|d| {
                d.observations()
                    .iter()
                    .all(|o| totals.iter().all(|t| t.ge_all(&o.bundle) && t != &o.bundle))
            })
            .map(|d| d.id().to_string())
            .collect();
        ids.sort();
        ids
    } else {
        Vec::new()
    };
    Hypotheses {
        equal_lengths,
        common_prices,
        small_agents,
    }
}

pub fn representative_consumer(g: &GroupDataset) -> RepConsumerVerdict {
    let hyp = hypotheses(g);
    let mut verdict = RepConsumerVerdict {
        answer: RepAnswer::HypothesisFailed,
        hypotheses: hyp.clone(),
        small_agent: None,
        shared: None,
        others: Vec::new(),
        failure: None,
        reason: None,
    };
    if !hyp.equal_lengths {
        verdict.reason = Some("agents have different numbers of observations".into());
        return verdict;
    }
    if !hyp.common_prices {
        verdict.reason = Some("observed prices differ across agents".into());
        return verdict;
    }
    let Some(small) = hyp.small_agents.first().cloned() else {
        verdict.reason = Some("no agent is small".into());
        return verdict;
    };
    verdict.small_agent = Some(small.clone());
    let agg = aggregate_dataset(g).expect("common prices checked");
    for (name, d) in g
        .agents()
        .iter()
        .map(|d| (d.id(), d))
        .chain([("aggregate", &agg)])
    {
        if let Some(cycle) = check_garp(d).cycle() {
            verdict.answer = RepAnswer::NotRepresentable;
            verdict.failure = Some(FailedDataset {
                dataset: name.to_string(),
                cycle: cycle.clone(),
            });
            return verdict;
        }
    }
    let union = union_dataset(g, &small).expect("dimensions agree");
    match rationalize(&union) {
        Ok(a) => verdict.shared = Some(a),
        Err(report) => {
            // With zero price coordinates a bundle below an aggregate bundle
            // can cost the same, and the union may then cycle.
            verdict.failure = report.cycle().map(|c| FailedDataset {
                dataset: "union".into(),
                cycle: c.clone(),
            });
            verdict.reason =
                Some("small agent's data and the aggregate data cycle together".into());
            return verdict;
        }
    }
    verdict.others = g
        .agents()
        .iter()
        .filter(|d| d.id() != small)
        .map(|d| AgentNumbers {
            agent: d.id().to_string(),
            numbers: rationalize(d).expect("GARP checked"),
        })
        .collect();
    verdict.answer = RepAnswer::Representable;
    verdict
}

/// Positive integer price vectors with entries in `1..=depth`.
pub fn sample_prices(dim: usize, depth: u32) -> Vec<RVector> {
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|v: Vec<i64>| {
                (1..=i64::from(depth)).map(move |e| {
                    let mut w = v.clone();
                    w.push(e);
                    w
                })
            })
            .collect();
    }
    out.iter().map(|v| RVector::from_ints(v)).collect()
}

/// Budget-line points spending shares `s_j / depth` of `income` on each good.
fn budget_grid(price: &RVector, income: &Rational, depth: u32) -> Vec<RVector> {
    let mut shares: Vec<Vec<u32>> = vec![Vec::new()];
    for j in 0..price.len() {
        let last = j + 1 == price.len();
        shares = shares
            .into_iter()
            .flat_map(|v| {
                let used: u32 = v.iter().sum();
                let range = if last {
                    (depth - used)..=(depth - used)
                } else {
                    0..=(depth - used)
                };
                range.map(move |s| {
                    let mut w = v.clone();
                    w.push(s);
                    w
                })
            })
            .collect();
    }
    shares
        .iter()
        .map(|s| {
            RVector::new(
                s.iter()
                    .zip(price.iter())
                    .map(|(&sj, pj)| income * Rational::new(sj.into(), depth.into()) / pj)
                    .collect(),
            )
        })
        .collect()
}

/// Spot-check the demand property of a REPRESENTABLE verdict.
///
/// At each observed price with positive entries the aggregate bundle must
/// maximize the shared utility and every agent's bundle its own utility. At
/// each sampled price the shared maximizer, handed entirely to the small
/// agent with the others at zero income, must be affordable and beat every
/// point of a budget grid of the given depth.
pub fn check_demand(
    g: &GroupDataset,
    verdict: &RepConsumerVerdict,
    samples: &[RVector],
    depth: u32,
) -> Result<bool, AfriatError> {
    let (Some(small), Some(shared)) = (&verdict.small_agent, &verdict.shared) else {
        return Ok(false);
    };
    let Some(union) = union_dataset(g, small) else {
        return Ok(false);
    };
    if !shared.satisfies(&union) {
        return Ok(false);
    }
    let v = build_utility(shared, &union)?;
    let agg = aggregate_dataset(g).map_err(|e| AfriatError::Inconsistent(e.to_string()))?;
    let mut utilities = Vec::new();
    for d in g.agents() {
        if d.id() == small {
            utilities.push(v.clone());
            continue;
        }
        let Some(n) = verdict.others.iter().find(|a| a.agent == d.id()) else {
            return Ok(false);
        };
        if !n.numbers.satisfies(d) {
            return Ok(false);
        }
        utilities.push(build_utility(&n.numbers, d)?);
    }
    for (k, o) in agg.observations().iter().enumerate() {
        if !o.price.gg_all(&RVector::zeros(o.price.len())) {
            continue;
        }
        let (_, best) = v.maximize(&o.price, &o.income())?;
        if v.eval(&o.bundle) != best {
            return Ok(false);
        }
        for (d, u) in g.agents().iter().zip(&utilities) {
            let x = &d.obs(k).bundle;
            let (_, b) = u.maximize(&o.price, &o.cost(x))?;
            if u.eval(x) != b {
                return Ok(false);
            }
        }
    }
    let income = int(1);
    for p in samples {
        let (z, best) = v.maximize(p, &income)?;
        if p.dot_unchecked(&z) > income || v.eval(&z) != best {
            return Ok(false);
        }
        if budget_grid(p, &income, depth)
            .iter()
            .any(|y| v.eval(y) > best)
        {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group(a: &[(&[i64], &[i64])], b: &[(&[i64], &[i64])]) -> GroupDataset {
        GroupDataset::new(vec![
            IndividualDataset::from_ints("A", a).unwrap(),
            IndividualDataset::from_ints("B", b).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn small_agent_represents_the_aggregate() {
        let g = group(
            &[(&[1, 2], &[4, 1]), (&[2, 1], &[1, 4])],
            &[(&[1, 2], &[1, 0]), (&[2, 1], &[0, 1])],
        );
        let verdict = representative_consumer(&g);
        assert_eq!(verdict.answer, RepAnswer::Representable);
        assert_eq!(verdict.small_agent.as_deref(), Some("B"));
        let union = union_dataset(&g, "B").unwrap();
        assert_eq!(union.len(), 4);
        assert!(verdict.shared.as_ref().unwrap().satisfies(&union));
        assert!(check_demand(&g, &verdict, &sample_prices(2, 3), 6).unwrap());
    }

    #[test]
    fn differing_prices_fail_the_hypothesis() {
        let g = group(&[(&[1, 2], &[4, 1])], &[(&[2, 1], &[1, 0])]);
        let verdict = representative_consumer(&g);
        assert_eq!(verdict.answer, RepAnswer::HypothesisFailed);
        assert!(!verdict.hypotheses.common_prices);
    }

    #[test]
    fn aggregate_cycle_is_reported() {
        let g = group(
            &[(&[2, 1], &[0, 1]), (&[1, 2], &[0, 2])],
            &[(&[2, 1], &[1, 1]), (&[1, 2], &[0, 1])],
        );
        assert!(g.agents().iter().all(|d| check_garp(d).passes()));
        let verdict = representative_consumer(&g);
        assert_eq!(verdict.answer, RepAnswer::NotRepresentable);
        let failure = verdict.failure.unwrap();
        assert_eq!(failure.dataset, "aggregate");
        let agg = aggregate_dataset(&g).unwrap();
        let direct =
            crate::revpref::direct_relations(&agg, crate::revpref::Carrier::observed(&agg))
                .unwrap();
        assert!(failure.cycle.holds_in(&direct));
    }

    #[test]
    fn price_samples_cover_the_grid() {
        let s = sample_prices(2, 3);
        assert_eq!(s.len(), 9);
        assert!(s.iter().all(|p| p.iter().all(|x| x >= &int(1))));
        let p = RVector::from_ints(&[1, 2, 4]);
        let grid = budget_grid(&p, &int(1), 4);
        assert_eq!(grid.len(), 15);
        assert!(grid.iter().all(|y| p.dot(y).unwrap() == int(1)));
    }

    #[test]
    fn tampered_shared_numbers_fail_the_demand_check() {
        let g = group(
            &[(&[1, 2], &[4, 1]), (&[2, 1], &[1, 4])],
            &[(&[1, 2], &[1, 0]), (&[2, 1], &[0, 1])],
        );
        let mut verdict = representative_consumer(&g);
        let shared = verdict.shared.as_mut().unwrap();
        shared.levels[0] += int(100);
        assert!(!check_demand(&g, &verdict, &[], 2).unwrap());
    }
}
