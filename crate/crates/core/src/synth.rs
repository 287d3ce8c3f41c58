//! Seeded Cobb–Douglas exchange economies with exact equilibria.
//!
//! Agent `i` spends share `α_ij` of its income on good `j`, so demand is
//! `α_ij · I / p_j`. Clearing every market gives
//! `p_j ω̄_j = Σ_i α_ij (p · ω_i)`, a singular linear system whose positive
//! solution is unique up to scale; we fix `Σ p = 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Allocation, EndowmentProfile, GroupDataset, IndividualDataset, Observation};
use crate::numerics::{int, solve_square, RVector, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CobbDouglasAgent {
    pub id: String,
    /// Positive, summing to one.
    pub shares: RVector,
    pub endowment: RVector,
}

impl CobbDouglasAgent {
    pub fn demand(&self, price: &RVector, income: &Rational) -> RVector {
        RVector::new(
            self.shares
                .iter()
                .zip(price.iter())
                .map(|(a, p)| a * income / p)
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticEconomy {
    pub agents: Vec<CobbDouglasAgent>,
    pub group: GroupDataset,
    pub endowments: EndowmentProfile,
    pub price: RVector,
    pub allocation: Allocation,
}

fn random_price(rng: &mut ChaCha8Rng, m: usize) -> RVector {
    RVector::new(
        (0..m)
            .map(|_| Rational::new(rng.gen_range(1..=9).into(), rng.gen_range(1..=4).into()))
            .collect(),
    )
}

/// Price normalized to sum one at which every market clears.
pub fn equilibrium(agents: &[CobbDouglasAgent]) -> Option<RVector> {
    let m = agents.first()?.shares.len();
    let total = agents
        .iter()
        .fold(RVector::zeros(m), |acc, a| acc.add(&a.endowment));
    let mut rows: Vec<Vec<Rational>> = (0..m)
        .map(|j| {
            (0..m)
                .map(|l| {
                    let spent: Rational =
                        agents.iter().map(|a| &a.shares[j] * &a.endowment[l]).sum();
                    if j == l {
                        &total[j] - spent
                    } else {
                        -spent
                    }
                })
                .collect()
        })
        .collect();
    // The columns sum to zero, so one clearing equation is redundant.
    rows[m - 1] = vec![int(1); m];
    let mut rhs = vec![int(0); m];
    rhs[m - 1] = int(1);
    solve_square(&rows, &rhs).map(RVector::new)
}

/// `n` agents, `m` goods, `k` observations per agent at prices shared by
/// all agents, each agent's income being the value of its endowment.
pub fn gen_economy(seed: u64, n: usize, m: usize, k: usize) -> SyntheticEconomy {
    assert!(n >= 1 && m >= 2 && k >= 1, "need n >= 1, m >= 2, k >= 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let agents: Vec<CobbDouglasAgent> = (0..n)
        .map(|i| {
            let weights: Vec<i64> = (0..m).map(|_| rng.gen_range(1..=5)).collect();
            let sum: i64 = weights.iter().sum();
            CobbDouglasAgent {
                id: format!("a{}", i + 1),
                shares: RVector::new(
                    weights
                        .iter()
                        .map(|&w| Rational::new(w.into(), sum.into()))
                        .collect(),
                ),
                endowment: RVector::new((0..m).map(|_| int(rng.gen_range(1..=5))).collect()),
            }
        })
        .collect();
    let prices: Vec<RVector> = (0..k).map(|_| random_price(&mut rng, m)).collect();
    let datasets = agents
        .iter()
        .map(|a| {
            let obs = prices
                .iter()
                .map(|p| Observation::new(p.clone(), a.demand(p, &p.dot_unchecked(&a.endowment))))
                .collect();
            IndividualDataset::new(a.id.clone(), m, obs).expect("positive demand")
        })
        .collect();
    let group = GroupDataset::new(datasets).expect("consistent dimensions");
    let price = equilibrium(&agents).expect("positive shares give a unique equilibrium");
    let endowments =
        Allocation::from_group_order(&group, agents.iter().map(|a| a.endowment.clone()).collect());
    let allocation = Allocation::from_group_order(
        &group,
        agents
            .iter()
            .map(|a| a.demand(&price, &price.dot_unchecked(&a.endowment)))
            .collect(),
    );
    SyntheticEconomy {
        agents,
        group,
        endowments,
        price,
        allocation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ratio;
    use crate::revpref::check_garp;

    #[test]
    fn two_agent_equilibrium_by_hand() {
        // Both spend half on each good; with totals (3,1) the price ratio is 1:3.
        let agents = vec![
            CobbDouglasAgent {
                id: "a".into(),
                shares: RVector::new(vec![ratio(1, 2), ratio(1, 2)]),
                endowment: RVector::from_ints(&[2, 0]),
            },
            CobbDouglasAgent {
                id: "b".into(),
                shares: RVector::new(vec![ratio(1, 2), ratio(1, 2)]),
                endowment: RVector::from_ints(&[1, 1]),
            },
        ];
        assert_eq!(
            equilibrium(&agents).unwrap(),
            RVector::new(vec![ratio(1, 4), ratio(3, 4)])
        );
    }

    #[test]
    fn markets_clear_and_budgets_bind() {
        for seed in 0..20 {
            let e = gen_economy(seed, 3, 3, 2);
            assert_eq!(e.allocation.total(3), e.endowments.total(3));
            for a in &e.agents {
                let x = e.allocation.bundle(&a.id);
                assert_eq!(e.price.dot(x).unwrap(), e.price.dot(&a.endowment).unwrap());
                assert_eq!(a.shares.sum(), int(1));
            }
            assert_eq!(e.price.sum(), int(1));
            assert!(e.price.iter().all(|p| p > &int(0)));
        }
    }

    #[test]
    fn demand_data_satisfy_garp() {
        for seed in 0..20 {
            let e = gen_economy(seed, 1, 2, 4);
            assert!(check_garp(&e.group.agents()[0]).passes());
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(gen_economy(7, 2, 2, 3), gen_economy(7, 2, 2, 3));
        assert_ne!(gen_economy(7, 2, 2, 3).group, gen_economy(8, 2, 2, 3).group);
    }
}
