//! Envy-free rationalization: utilities for which no agent prefers another
//! agent's bundle in `x̄`. Each agent gets a utility level `u_{i,j}` and a
//! supporting price `p_{i,j}` at every bundle `x̄_j` of the allocation.

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::feasibility::{solve, DualCertificate, FeasibilityOutcome, FeasibilityProblem};
use crate::model::{Allocation, GroupDataset};
use crate::numerics::{int, RVector, Rational};

use super::{check_inputs, CollectiveError};

/// Column positions for agent `i`.
struct EnvyColumns {
    levels: Vec<usize>,
    multipliers: Vec<usize>,
    /// `u_{i,j}` for every agent `j` in group order.
    bundle_levels: Vec<usize>,
    /// `p_{i,j}`: `prices[j][m]`.
    prices: Vec<Vec<usize>>,
}

fn allocate(g: &GroupDataset) -> (Vec<String>, Vec<EnvyColumns>) {
    let mut columns = Vec::new();
    let mut push = |label: String| {
        columns.push(label);
        columns.len() - 1
    };
    let ids: Vec<&str> = g.ids().collect();
    let cols = g
        .agents()
        .iter()
        .map(|d| {
            let i = d.id();
            EnvyColumns {
                levels: (1..=d.len())
                    .map(|k| push(format!("u{k} agent {i}")))
                    .collect(),
                multipliers: (1..=d.len())
                    .map(|k| push(format!("lambda{k} agent {i}")))
                    .collect(),
                bundle_levels: ids
                    .iter()
                    .map(|j| push(format!("u agent {i} at {j}")))
                    .collect(),
                prices: ids
                    .iter()
                    .map(|j| {
                        (1..=g.dim())
                            .map(|m| push(format!("p{m} agent {i} at {j}")))
                            .collect()
                    })
                    .collect(),
            }
        })
        .collect();
    (columns, cols)
}

/// Build the envy-free system. Beyond the five families of inequalities
/// (data, budget at `x̄_j`, support at `x̄_j` against data, support among
/// allocation bundles, and no envy), every `λ^k_i` is strictly positive and
/// every `p_{i,j}` is nonnegative with a strictly positive sum.
pub fn envy_system(g: &GroupDataset, xbar: &Allocation) -> FeasibilityProblem {
    let (columns, cols) = allocate(g);
    let mut p = FeasibilityProblem::new(columns);
    let bars: Vec<&RVector> = xbar.in_group_order(g);
    let ids: Vec<&str> = g.ids().collect();
    let n = g.len();
    for (d, c) in g.agents().iter().zip(&cols) {
        let i = d.id();
        let obs = d.observations();
        for (l, ol) in obs.iter().enumerate() {
            for (k, ok) in obs.iter().enumerate() {
                let coef = ol.cost(&ok.bundle) - ol.income();
                if k == l || coef.is_positive() {
                    continue;
                }
                p.add_weak(
                    format!("data {} over {} agent {i}", l + 1, k + 1),
                    &[
                        (c.levels[l], int(1)),
                        (c.levels[k], int(-1)),
                        (c.multipliers[l], coef),
                    ],
                )
                .expect("fresh label");
            }
        }
        for j in 0..n {
            for (k, ok) in obs.iter().enumerate() {
                let coef = ok.cost(bars[j]) - ok.income();
                if coef.is_positive() {
                    continue;
                }
                p.add_weak(
                    format!("budget x{} at bar {} agent {i}", k + 1, ids[j]),
                    &[
                        (c.levels[k], int(1)),
                        (c.bundle_levels[j], int(-1)),
                        (c.multipliers[k], coef),
                    ],
                )
                .expect("fresh label");
            }
            for (k, ok) in obs.iter().enumerate() {
                let mut terms = vec![(c.bundle_levels[j], int(1)), (c.levels[k], int(-1))];
                let diff = ok.bundle.sub(bars[j]);
                terms.extend(c.prices[j].iter().copied().zip(diff.iter().cloned()));
                p.add_weak(
                    format!("support x{} at bar {} agent {i}", k + 1, ids[j]),
                    &terms,
                )
                .expect("fresh label");
            }
            for h in 0..n {
                if h == j {
                    continue;
                }
                let mut terms = vec![(c.bundle_levels[h], int(1)), (c.bundle_levels[j], int(-1))];
                let diff = bars[j].sub(bars[h]);
                terms.extend(c.prices[h].iter().copied().zip(diff.iter().cloned()));
                p.add_weak(
                    format!("support bar {} at bar {} agent {i}", ids[j], ids[h]),
                    &terms,
                )
                .expect("fresh label");
            }
        }
        let me = ids.iter().position(|&x| x == i).expect("own id");
        for (j, &jd) in ids.iter().enumerate() {
            if j == me {
                continue;
            }
            let own = c.bundle_levels[me];
            p.add_weak(
                format!("no envy of {jd} agent {i}"),
                &[(own, int(1)), (c.bundle_levels[j], int(-1))],
            )
            .expect("fresh label");
        }
        for (k, &col) in c.multipliers.iter().enumerate() {
            p.add_strict(format!("lambda{} agent {i}", k + 1), &[(col, int(1))])
                .expect("fresh label");
        }
        for (j, price) in c.prices.iter().enumerate() {
            for (m, &col) in price.iter().enumerate() {
                p.add_weak(
                    format!("p{} agent {i} at {} >= 0", m + 1, ids[j]),
                    &[(col, int(1))],
                )
                .expect("fresh label");
            }
            let terms: Vec<(usize, Rational)> = price.iter().map(|&col| (col, int(1))).collect();
            p.add_strict(format!("p agent {i} at {} nonzero", ids[j]), &terms)
                .expect("fresh label");
        }
    }
    p
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvyAgentValues {
    pub agent: String,
    #[serde(with = "crate::numerics::rational_vec_serde")]
    pub levels: Vec<Rational>,
    #[serde(with = "crate::numerics::rational_vec_serde")]
    pub multipliers: Vec<Rational>,
    /// `u_{i,j}` in group order.
    #[serde(with = "crate::numerics::rational_vec_serde")]
    pub bundle_levels: Vec<Rational>,
    /// `p_{i,j}` in group order.
    pub prices: Vec<RVector>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvyValues {
    pub agents: Vec<EnvyAgentValues>,
}

impl EnvyValues {
    fn from_vector(g: &GroupDataset, v: &RVector) -> Self {
        let (_, cols) = allocate(g);
        let pick = |cs: &[usize]| cs.iter().map(|&c| v[c].clone()).collect::<Vec<_>>();
        EnvyValues {
            agents: g
                .agents()
                .iter()
                .zip(&cols)
                .map(|(d, c)| EnvyAgentValues {
                    agent: d.id().to_string(),
                    levels: pick(&c.levels),
                    multipliers: pick(&c.multipliers),
                    bundle_levels: pick(&c.bundle_levels),
                    prices: c.prices.iter().map(|p| RVector::new(pick(p))).collect(),
                })
                .collect(),
        }
    }

    /// Flatten into the column order of [`envy_system`]; `None` on a shape mismatch.
    pub fn to_vector(&self, g: &GroupDataset) -> Option<RVector> {
        let (columns, cols) = allocate(g);
        if self.agents.len() != g.len() {
            return None;
        }
        let mut v = vec![int(0); columns.len()];
        for ((a, c), d) in self.agents.iter().zip(&cols).zip(g.agents()) {
            if a.agent != d.id()
                || a.levels.len() != c.levels.len()
                || a.multipliers.len() != c.multipliers.len()
                || a.bundle_levels.len() != c.bundle_levels.len()
                || a.prices.len() != c.prices.len()
                || a.prices.iter().any(|p| p.len() != g.dim())
            {
                return None;
            }
            let mut put = |cs: &[usize], xs: &[Rational]| {
                for (&col, x) in cs.iter().zip(xs) {
                    v[col] = x.clone();
                }
            };
            put(&c.levels, &a.levels);
            put(&c.multipliers, &a.multipliers);
            put(&c.bundle_levels, &a.bundle_levels);
            for (cs, p) in c.prices.iter().zip(&a.prices) {
                put(cs, p.entries());
            }
        }
        Some(RVector::new(v))
    }

    /// Rebuild the system and substitute.
    pub fn verify(&self, g: &GroupDataset, xbar: &Allocation) -> bool {
        self.to_vector(g)
            .is_some_and(|v| envy_system(g, xbar).is_witness(&v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EnvyAnswer {
    Yes,
    No,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvyVerdict {
    pub answer: EnvyAnswer,
    pub values: Option<EnvyValues>,
    /// Raw dual weights over the rows of [`envy_system`].
    pub dual: Option<DualCertificate>,
}

impl EnvyVerdict {
    pub fn verify(&self, g: &GroupDataset, xbar: &Allocation) -> bool {
        match (self.answer, &self.values, &self.dual) {
            (EnvyAnswer::Yes, Some(v), None) => v.verify(g, xbar),
            (EnvyAnswer::No, None, Some(c)) => {
                envy_system(g, xbar).is_certificate(&c.strict_weights, &c.weak_weights)
            }
            _ => false,
        }
    }
}

/// Are there rationalizing utilities under which no agent envies another's
/// bundle in `x̄`?
pub fn envy_free_rationalizable(
    g: &GroupDataset,
    xbar: &Allocation,
) -> Result<EnvyVerdict, CollectiveError> {
    check_inputs(g, xbar)?;
    let p = envy_system(g, xbar);
    Ok(match solve(&p) {
        FeasibilityOutcome::Primal(w) => EnvyVerdict {
            answer: EnvyAnswer::Yes,
            values: Some(EnvyValues::from_vector(g, &w.v)),
            dual: None,
        },
        FeasibilityOutcome::Dual(c) => EnvyVerdict {
            answer: EnvyAnswer::No,
            values: None,
            dual: Some(c),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collective::tests::example_group;
    use crate::model::IndividualDataset;

    fn v(xs: &[i64]) -> RVector {
        RVector::from_ints(xs)
    }

    #[test]
    fn identical_bundles_are_never_envied() {
        let d = IndividualDataset::from_ints("a", &[(&[1, 2], &[2, 1])]).unwrap();
        let e = IndividualDataset::from_ints("b", &[(&[1, 2], &[2, 1])]).unwrap();
        let g = GroupDataset::new(vec![d, e]).unwrap();
        let x = Allocation::from_group_order(&g, vec![v(&[2, 1]), v(&[2, 1])]);
        let verdict = envy_free_rationalizable(&g, &x).unwrap();
        assert_eq!(verdict.answer, EnvyAnswer::Yes);
        assert!(verdict.verify(&g, &x));
    }

    #[test]
    fn single_agent_at_an_observed_bundle() {
        let g = GroupDataset::new(vec![IndividualDataset::from_ints(
            "a",
            &[(&[1, 2], &[2, 1]), (&[2, 1], &[1, 2])],
        )
        .unwrap()])
        .unwrap();
        let x = Allocation::from_group_order(&g, vec![v(&[2, 1])]);
        let verdict = envy_free_rationalizable(&g, &x).unwrap();
        assert_eq!(verdict.answer, EnvyAnswer::Yes);
        assert!(verdict.verify(&g, &x));
    }

    #[test]
    fn example_allocation_is_envy_free() {
        let g = example_group();
        let x = Allocation::from_group_order(&g, vec![v(&[1, 0]), v(&[0, 4])]);
        let verdict = envy_free_rationalizable(&g, &x).unwrap();
        assert!(verdict.verify(&g, &x));
        assert_eq!(verdict.answer, EnvyAnswer::Yes);
    }

    #[test]
    fn strictly_smaller_bundle_is_envied() {
        // Agent b gets strictly more of everything than agent a; a must envy b.
        let g = GroupDataset::new(vec![
            IndividualDataset::empty("a", 2).unwrap(),
            IndividualDataset::empty("b", 2).unwrap(),
        ])
        .unwrap();
        let x = Allocation::from_group_order(&g, vec![v(&[1, 1]), v(&[2, 2])]);
        let verdict = envy_free_rationalizable(&g, &x).unwrap();
        assert_eq!(verdict.answer, EnvyAnswer::No);
        assert!(verdict.verify(&g, &x));
    }
}
