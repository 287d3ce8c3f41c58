//! Self-contained certificates for every verdict.
//!
//! A certificate names the agent or allocation it speaks about and carries
//! the objects tested, so that [`Certificate::verify`] needs nothing but
//! the dataset. Verification rebuilds revealed-preference relations and
//! substitutes numbers; it never solves a linear program.

use serde::{Deserialize, Serialize};

use crate::afriat::AfriatNumbers;
use crate::aggregate::{union_dataset, RepAnswer, RepConsumerVerdict};
use crate::collective::{
    budgets_balance, envy_system, AgentNumbers, DominationCert, EfficiencyAnswer,
    EfficiencyVerdict, EnvyAnswer, EnvyValues, EnvyVerdict, KaldorAnswer, KaldorVerdict,
    SupportingPrice, WalrasAllocationVerdict, WalrasAnswer,
};
use crate::feasibility::DualCertificate;
use crate::individual::{AcceptCertificate, AcceptVerdict, RankAnswer, RankVerdict};
use crate::model::{
    aggregate_dataset, Allocation, EndowmentProfile, GroupDataset, IndividualDataset, Observation,
};
use crate::numerics::{rational_serde, RVector, Rational};
use crate::revpref::{
    check_garp, close, direct_relations, term_weights, verify_besting, Carrier, GarpCycle, Mode,
    Term,
};
use crate::walras_price::{PriceAnswer, PriceCert, PriceEquilibrium, PriceVerdict};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    /// The agent's data violate GARP along `cycle`.
    GarpViolation { agent: String, cycle: GarpCycle },
    /// Afriat numbers rationalizing the agent's data.
    Rationalization {
        agent: String,
        numbers: AfriatNumbers,
    },
    /// `x̄` strictly bests `ȳ` with these terms.
    RobustRanking {
        agent: String,
        xbar: RVector,
        ybar: RVector,
        terms: Vec<Term>,
    },
    /// `x̄` strictly bests itself, so no rationalizing utility has it as a
    /// possible choice.
    SelfBesting {
        agent: String,
        xbar: RVector,
        terms: Vec<Term>,
    },
    /// A price at which every bundle revealed preferred to `x̄` or `ȳ`
    /// costs at least `x̄`, strictly so when the preference is strict.
    RankingPrice {
        agent: String,
        xbar: RVector,
        ybar: RVector,
        price: RVector,
    },
    AcceptableTop {
        agent: String,
        xbar: RVector,
        price: RVector,
        numbers: AfriatNumbers,
    },
    /// A strict cycle once `x̄` is ranked above every observed bundle.
    TopCycle {
        agent: String,
        xbar: RVector,
        cycle: GarpCycle,
    },
    Support {
        xbar: Allocation,
        support: SupportingPrice,
    },
    Domination {
        xbar: Allocation,
        domination: DominationCert,
    },
    KaldorSupport {
        xbar: Allocation,
        ybar: Allocation,
        support: SupportingPrice,
    },
    KaldorDomination {
        xbar: Allocation,
        ybar: Allocation,
        #[serde(with = "rational_serde")]
        kappa: Rational,
        domination: DominationCert,
    },
    WalrasSupport {
        endowments: EndowmentProfile,
        xbar: Allocation,
        support: SupportingPrice,
    },
    WalrasDomination {
        endowments: EndowmentProfile,
        xbar: Allocation,
        domination: DominationCert,
    },
    PriceEquilibrium {
        endowments: EndowmentProfile,
        price: RVector,
        equilibrium: PriceEquilibrium,
    },
    PriceRefutation {
        endowments: EndowmentProfile,
        price: RVector,
        refutation: PriceCert,
    },
    Representative {
        small_agent: String,
        shared: AfriatNumbers,
        others: Vec<AgentNumbers>,
    },
    /// The named dataset (an agent id or `aggregate`) violates GARP.
    AggregationCycle { dataset: String, cycle: GarpCycle },
    EnvyFree {
        xbar: Allocation,
        values: EnvyValues,
    },
    /// Motzkin weights showing the no-envy system infeasible.
    Envy {
        xbar: Allocation,
        dual: DualCertificate,
    },
}

fn observed_cycle(d: &IndividualDataset, cycle: &GarpCycle) -> bool {
    direct_relations(d, Carrier::observed(d)).is_ok_and(|g| cycle.holds_in(&g))
}

fn ranking_price_holds(d: &IndividualDataset, xbar: &RVector, ybar: &RVector, q: &RVector) -> bool {
    if q.len() != d.dim() || !q.is_nonnegative() || q.is_zero() {
        return false;
    }
    let Ok(carrier) = Carrier::observed_with(d, &[("xbar", xbar), ("ybar", ybar)]) else {
        return false;
    };
    let Ok(direct) = direct_relations(d, carrier) else {
        return false;
    };
    let g = close(&direct);
    let (x, y) = (d.len(), d.len() + 1);
    let cost = q.dot_unchecked(xbar);
    (0..g.len()).all(|z| {
        let c = q.dot_unchecked(g.carrier().bundle(z));
        if g.strict(z, x) || g.strict(z, y) {
            c > cost
        } else if g.weak(z, x) || g.weak(z, y) {
            c >= cost
        } else {
            true
        }
    })
}

fn top_cycle_holds(d: &IndividualDataset, xbar: &RVector, cycle: &GarpCycle) -> bool {
    let Ok(carrier) = Carrier::observed_with(d, &[("xbar", xbar)]) else {
        return false;
    };
    let Ok(mut g) = direct_relations(d, carrier) else {
        return false;
    };
    for k in 0..d.len() {
        g.add_weak(d.len(), k);
    }
    cycle.holds_in(&g)
}

fn representative_holds(
    g: &GroupDataset,
    small: &str,
    shared: &AfriatNumbers,
    others: &[AgentNumbers],
) -> bool {
    let Ok(agg) = aggregate_dataset(g) else {
        return false;
    };
    let Some(union) = union_dataset(g, small) else {
        return false;
    };
    let Some(d) = g.agent(small) else {
        return false;
    };
    let is_small = d.observations().iter().all(|o| {
        agg.observations()
            .iter()
            .all(|a| a.bundle.ge_all(&o.bundle) && a.bundle != o.bundle)
    });
    let common = g.agents().iter().all(|d| {
        d.len() == agg.len()
            && d.observations()
                .iter()
                .zip(agg.observations())
                .all(|(o, a)| o.price == a.price)
    });
    let rest: Vec<&IndividualDataset> = g.agents().iter().filter(|d| d.id() != small).collect();
    is_small
        && common
        && shared.satisfies(&union)
        && others.len() == rest.len()
        && rest
            .iter()
            .zip(others)
            .all(|(d, n)| n.agent == d.id() && n.numbers.satisfies(d))
}

impl Certificate {
    /// Check the certificate against the data it claims to describe.
    pub fn verify(&self, g: &GroupDataset) -> bool {
        let agent = |id: &str| g.agent(id);
        match self {
            Certificate::GarpViolation { agent: a, cycle } => {
                agent(a).is_some_and(|d| observed_cycle(d, cycle))
            }
            Certificate::Rationalization { agent: a, numbers } => {
                agent(a).is_some_and(|d| numbers.satisfies(d))
            }
            Certificate::RobustRanking {
                agent: a,
                xbar,
                ybar,
                terms,
            } => agent(a).is_some_and(|d| {
                verify_besting(d, xbar, ybar, &term_weights(terms), Mode::Strict).unwrap_or(false)
            }),
            Certificate::SelfBesting {
                agent: a,
                xbar,
                terms,
            } => agent(a).is_some_and(|d| {
                verify_besting(d, xbar, xbar, &term_weights(terms), Mode::Strict).unwrap_or(false)
            }),
            Certificate::RankingPrice {
                agent: a,
                xbar,
                ybar,
                price,
            } => agent(a).is_some_and(|d| ranking_price_holds(d, xbar, ybar, price)),
            Certificate::AcceptableTop {
                agent: a,
                xbar,
                price,
                numbers,
            } => agent(a).is_some_and(|d| {
                let Ok(aug) = d.with_observation(Observation::new(price.clone(), xbar.clone()))
                else {
                    return false;
                };
                numbers.satisfies(&aug)
                    && price.is_nonnegative()
                    && !price.is_zero()
                    && numbers
                        .levels
                        .last()
                        .is_some_and(|top| numbers.levels.iter().all(|u| u <= top))
            }),
            Certificate::TopCycle {
                agent: a,
                xbar,
                cycle,
            } => agent(a).is_some_and(|d| top_cycle_holds(d, xbar, cycle)),
            Certificate::Support { xbar, support } => support.verify(g, xbar),
            Certificate::Domination { xbar, domination } => domination.verify(g, xbar),
            Certificate::KaldorSupport {
                xbar,
                ybar,
                support,
            } => {
                let gap = xbar.total(g.dim()).sub(&ybar.total(g.dim()));
                support.verify(g, xbar)
                    && support
                        .price
                        .dot(&gap)
                        .is_ok_and(|c| c >= Rational::default())
            }
            Certificate::KaldorDomination {
                xbar,
                ybar,
                kappa,
                domination,
            } => domination.verify_kaldor(g, xbar, ybar, kappa),
            Certificate::WalrasSupport {
                endowments,
                xbar,
                support,
            } => support.verify(g, xbar) && budgets_balance(&support.price, g, endowments, xbar),
            Certificate::WalrasDomination {
                endowments,
                xbar,
                domination,
            } => domination.verify_walras(g, endowments, xbar),
            Certificate::PriceEquilibrium {
                endowments,
                price,
                equilibrium,
            } => equilibrium.verify(g, endowments, price),
            Certificate::PriceRefutation {
                endowments,
                price,
                refutation,
            } => refutation.verify(g, endowments, price),
            Certificate::Representative {
                small_agent,
                shared,
                others,
            } => representative_holds(g, small_agent, shared, others),
            Certificate::AggregationCycle { dataset, cycle } => {
                let d = if dataset == "aggregate" {
                    aggregate_dataset(g).ok()
                } else {
                    agent(dataset).cloned()
                };
                d.is_some_and(|d| observed_cycle(&d, cycle))
            }
            Certificate::EnvyFree { xbar, values } => {
                xbar.validate_for(g, "allocation").is_ok() && values.verify(g, xbar)
            }
            Certificate::Envy { xbar, dual } => {
                xbar.validate_for(g, "allocation").is_ok()
                    && envy_system(g, xbar).is_certificate(&dual.strict_weights, &dual.weak_weights)
            }
        }
    }

    /// Whether this certificate backs a positive answer.
    pub fn is_positive(&self) -> bool {
        matches!(
            self,
            Certificate::Rationalization { .. }
                | Certificate::RobustRanking { .. }
                | Certificate::AcceptableTop { .. }
                | Certificate::Support { .. }
                | Certificate::KaldorSupport { .. }
                | Certificate::WalrasSupport { .. }
                | Certificate::PriceEquilibrium { .. }
                | Certificate::Representative { .. }
                | Certificate::EnvyFree { .. }
        )
    }

    pub fn from_garp(d: &IndividualDataset) -> Certificate {
        match check_garp(d).cycle() {
            Some(c) => Certificate::GarpViolation {
                agent: d.id().to_string(),
                cycle: c.clone(),
            },
            None => Certificate::Rationalization {
                agent: d.id().to_string(),
                numbers: crate::afriat::rationalize(d).expect("GARP passes"),
            },
        }
    }

    pub fn from_rank(
        d: &IndividualDataset,
        xbar: &RVector,
        ybar: &RVector,
        v: &RankVerdict,
    ) -> Option<Certificate> {
        let agent = d.id().to_string();
        Some(match v.answer {
            RankAnswer::RobustlyBetter => Certificate::RobustRanking {
                agent,
                xbar: xbar.clone(),
                ybar: ybar.clone(),
                terms: v.terms.clone()?,
            },
            RankAnswer::SelfBesting => Certificate::SelfBesting {
                agent,
                xbar: xbar.clone(),
                terms: v.terms.clone()?,
            },
            RankAnswer::NotRobust => Certificate::RankingPrice {
                agent,
                xbar: xbar.clone(),
                ybar: ybar.clone(),
                price: v.price.clone()?,
            },
        })
    }

    /// `None` for the domination branch, which cannot occur once the data
    /// have passed GARP and has no dedicated certificate kind.
    pub fn from_accept(
        d: &IndividualDataset,
        xbar: &RVector,
        v: &AcceptVerdict,
    ) -> Option<Certificate> {
        let agent = d.id().to_string();
        match &v.certificate {
            AcceptCertificate::Top { price, numbers } => Some(Certificate::AcceptableTop {
                agent,
                xbar: xbar.clone(),
                price: price.clone(),
                numbers: numbers.clone(),
            }),
            AcceptCertificate::Cycle { cycle } if cycle.nodes.contains(&d.len()) => {
                Some(Certificate::TopCycle {
                    agent,
                    xbar: xbar.clone(),
                    cycle: cycle.clone(),
                })
            }
            AcceptCertificate::Cycle { cycle } => Some(Certificate::GarpViolation {
                agent,
                cycle: cycle.clone(),
            }),
            AcceptCertificate::Dominated { .. } => None,
        }
    }

    pub fn from_efficiency(xbar: &Allocation, v: &EfficiencyVerdict) -> Option<Certificate> {
        Some(match v.answer {
            EfficiencyAnswer::PossiblyEfficient => Certificate::Support {
                xbar: xbar.clone(),
                support: v.support.clone()?,
            },
            EfficiencyAnswer::Dominated => Certificate::Domination {
                xbar: xbar.clone(),
                domination: v.domination.clone()?,
            },
        })
    }

    pub fn from_kaldor(
        xbar: &Allocation,
        ybar: &Allocation,
        v: &KaldorVerdict,
    ) -> Option<Certificate> {
        Some(match v.answer {
            KaldorAnswer::Sufficient => Certificate::KaldorSupport {
                xbar: xbar.clone(),
                ybar: ybar.clone(),
                support: v.support.clone()?,
            },
            KaldorAnswer::Inconclusive => Certificate::KaldorDomination {
                xbar: xbar.clone(),
                ybar: ybar.clone(),
                kappa: v.kappa.clone(),
                domination: v.domination.clone()?,
            },
        })
    }

    pub fn from_walras(
        omega: &EndowmentProfile,
        xbar: &Allocation,
        v: &WalrasAllocationVerdict,
    ) -> Option<Certificate> {
        Some(match v.answer {
            WalrasAnswer::Yes => Certificate::WalrasSupport {
                endowments: omega.clone(),
                xbar: xbar.clone(),
                support: v.support.clone()?,
            },
            WalrasAnswer::No => Certificate::WalrasDomination {
                endowments: omega.clone(),
                xbar: xbar.clone(),
                domination: v.domination.clone()?,
            },
        })
    }

    pub fn from_price(
        omega: &EndowmentProfile,
        price: &RVector,
        v: &PriceVerdict,
    ) -> Option<Certificate> {
        Some(match v.answer {
            PriceAnswer::Yes => Certificate::PriceEquilibrium {
                endowments: omega.clone(),
                price: price.clone(),
                equilibrium: v.equilibrium.clone()?,
            },
            PriceAnswer::No => Certificate::PriceRefutation {
                endowments: omega.clone(),
                price: price.clone(),
                refutation: v.certificate.clone()?,
            },
        })
    }

    /// `None` when the hypothesis fails without a cycle to show.
    pub fn from_representative(v: &RepConsumerVerdict) -> Option<Certificate> {
        match v.answer {
            RepAnswer::Representable => Some(Certificate::Representative {
                small_agent: v.small_agent.clone()?,
                shared: v.shared.clone()?,
                others: v.others.clone(),
            }),
            RepAnswer::NotRepresentable | RepAnswer::HypothesisFailed => {
                let f = v.failure.as_ref()?;
                (f.dataset != "union").then(|| Certificate::AggregationCycle {
                    dataset: f.dataset.clone(),
                    cycle: f.cycle.clone(),
                })
            }
        }
    }

    pub fn from_envy(xbar: &Allocation, v: &EnvyVerdict) -> Option<Certificate> {
        Some(match v.answer {
            EnvyAnswer::Yes => Certificate::EnvyFree {
                xbar: xbar.clone(),
                values: v.values.clone()?,
            },
            EnvyAnswer::No => Certificate::Envy {
                xbar: xbar.clone(),
                dual: v.dual.clone()?,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collective::{possibly_efficient, walrasian_allocation};
    use crate::individual::{acceptable_top, rank_robust};
    use crate::numerics::ratio;

    fn round_trip(c: &Certificate) -> Certificate {
        serde_json::from_str(&serde_json::to_string(c).unwrap()).unwrap()
    }

    fn single(pairs: &[(&[i64], &[i64])]) -> GroupDataset {
        GroupDataset::new(vec![IndividualDataset::from_ints("a", pairs).unwrap()]).unwrap()
    }

    #[test]
    fn garp_certificates_round_trip() {
        for g in [
            single(&[(&[1, 2], &[2, 1]), (&[2, 1], &[1, 2])]),
            single(&[(&[2, 1], &[1, 0]), (&[1, 2], &[0, 1])]),
        ] {
            let c = round_trip(&Certificate::from_garp(&g.agents()[0]));
            assert!(c.verify(&g));
        }
        let bad = single(&[(&[2, 1], &[1, 0]), (&[1, 2], &[0, 1])]);
        assert!(matches!(
            Certificate::from_garp(&bad.agents()[0]),
            Certificate::GarpViolation { .. }
        ));
        let good = single(&[(&[1, 2], &[2, 1]), (&[2, 1], &[1, 2])]);
        let forged = Certificate::GarpViolation {
            agent: "a".into(),
            cycle: match Certificate::from_garp(&bad.agents()[0]) {
                Certificate::GarpViolation { cycle, .. } => cycle,
                _ => unreachable!(),
            },
        };
        assert!(!forged.verify(&good));
    }

    #[test]
    fn ranking_certificates_verify() {
        let g = single(&[(&[1, 1], &[2, 2])]);
        let d = &g.agents()[0];
        for (x, y) in [
            (RVector::from_ints(&[2, 2]), RVector::from_ints(&[1, 1])),
            (RVector::from_ints(&[1, 1]), RVector::from_ints(&[3, 0])),
        ] {
            let v = rank_robust(d, &x, &y).unwrap();
            let c = round_trip(&Certificate::from_rank(d, &x, &y, &v).unwrap());
            assert!(c.verify(&g), "{c:?}");
        }
    }

    #[test]
    fn ranking_price_checks_strict_rows() {
        let g = single(&[(&[1, 1], &[2, 2])]);
        let c = Certificate::RankingPrice {
            agent: "a".into(),
            xbar: RVector::from_ints(&[2, 2]),
            ybar: RVector::from_ints(&[1, 1]),
            price: RVector::from_ints(&[1, 1]),
        };
        // x¹ = x̄ is only weakly preferred to itself, yet strictly to ȳ.
        assert!(!c.verify(&g));
    }

    #[test]
    fn accept_and_collective_certificates_verify() {
        let g = single(&[(&[1, 2], &[2, 1])]);
        let d = &g.agents()[0];
        for x in [RVector::from_ints(&[3, 3]), RVector::from_ints(&[0, 0])] {
            let v = acceptable_top(d, &x).unwrap();
            assert!(Certificate::from_accept(d, &x, &v).unwrap().verify(&g));
        }
        let two = GroupDataset::new(vec![
            IndividualDataset::from_ints("1", &[(&[1, 2], &[2, 1])]).unwrap(),
            IndividualDataset::from_ints("2", &[(&[2, 1], &[1, 2])]).unwrap(),
        ])
        .unwrap();
        let dominated = Allocation::from_group_order(
            &two,
            vec![
                RVector::new(vec![ratio(29, 10), ratio(1, 2)]),
                RVector::new(vec![ratio(1, 2), ratio(29, 10)]),
            ],
        );
        let observed = Allocation::from_group_order(
            &two,
            vec![RVector::from_ints(&[2, 1]), RVector::from_ints(&[1, 2])],
        );
        for xbar in [&dominated, &observed] {
            let v = possibly_efficient(&two, xbar).unwrap();
            let c = round_trip(&Certificate::from_efficiency(xbar, &v).unwrap());
            assert!(c.verify(&two));
        }
        let v = walrasian_allocation(&two, &observed, &observed).unwrap();
        let c = Certificate::from_walras(&observed, &observed, &v).unwrap();
        assert!(c.is_positive() && c.verify(&two));
        let c = Certificate::Domination {
            xbar: observed.clone(),
            domination: match Certificate::from_efficiency(
                &dominated,
                &possibly_efficient(&two, &dominated).unwrap(),
            ) {
                Some(Certificate::Domination { domination, .. }) => domination,
                _ => unreachable!(),
            },
        };
        assert!(!c.verify(&two));
    }
}
