use proptest::prelude::*;

use revealed_welfare::afriat::{build_utility, rationalize, rationalize_seeded};
use revealed_welfare::aggregate::{representative_consumer, union_dataset, RepAnswer};
use revealed_welfare::certificate::Certificate;
use revealed_welfare::collective::possibly_efficient;
use revealed_welfare::feasibility::{solve, FeasibilityOutcome, FeasibilityProblem, RowKind};
use revealed_welfare::individual::{rank_robust, RankAnswer};
use revealed_welfare::model::{aggregate_dataset, GroupDataset, IndividualDataset, Observation};
use revealed_welfare::numerics::{RVector, Rational};
use revealed_welfare::revpref::check_garp;
use revealed_welfare::synth::gen_economy;
use revealed_welfare::walras_price::consistent_price;

fn rational(lo: i64, hi: i64) -> impl Strategy<Value = Rational> {
    (lo..=hi, 1i64..=3).prop_map(|(n, d)| Rational::new(n.into(), d.into()))
}

fn vector(m: usize, lo: i64, hi: i64) -> impl Strategy<Value = RVector> {
    prop::collection::vec(rational(lo, hi), m).prop_map(RVector::new)
}

fn positive(m: usize) -> impl Strategy<Value = RVector> {
    vector(m, 1, 6)
}

fn dataset_with(m: usize, k: usize) -> impl Strategy<Value = IndividualDataset> {
    prop::collection::vec((positive(m), vector(m, 0, 6)), k).prop_map(move |obs| {
        let obs = obs
            .into_iter()
            .map(|(p, x)| Observation::new(p, x))
            .collect();
        IndividualDataset::new("a", m, obs).unwrap()
    })
}

fn dataset() -> impl Strategy<Value = IndividualDataset> {
    (1usize..=3, 1usize..=5).prop_flat_map(|(m, k)| dataset_with(m, k))
}

fn system() -> impl Strategy<Value = FeasibilityProblem> {
    (1usize..=5, 1usize..=8).prop_flat_map(|(n, r)| {
        prop::collection::vec((vector(n, -4, 4), any::<bool>()), r).prop_map(move |rows| {
            let mut p = FeasibilityProblem::new((0..n).map(|j| format!("v{j}")).collect());
            for (i, (row, strict)) in rows.into_iter().enumerate() {
                let kind = if strict || i == 0 {
                    RowKind::Strict
                } else {
                    RowKind::Weak
                };
                p.add_row(kind, format!("r{i}"), row).unwrap();
            }
            p
        })
    })
}

/// Two agents facing the same prices.
fn common_price_group() -> impl Strategy<Value = GroupDataset> {
    (1usize..=3, 1usize..=3).prop_flat_map(|(m, k)| {
        (
            prop::collection::vec(positive(m), k),
            prop::collection::vec(vector(m, 0, 5), k),
            prop::collection::vec(vector(m, 0, 5), k),
        )
            .prop_map(move |(ps, xa, xb)| {
                let make = |id: &str, xs: &[RVector]| {
                    let obs = ps
                        .iter()
                        .zip(xs)
                        .map(|(p, x)| Observation::new(p.clone(), x.clone()))
                        .collect();
                    IndividualDataset::new(id, m, obs).unwrap()
                };
                GroupDataset::new(vec![make("A", &xa), make("B", &xb)]).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rationalizable_exactly_when_garp_holds(d in dataset()) {
        let garp = check_garp(&d);
        match rationalize(&d) {
            Ok(a) => {
                prop_assert!(garp.passes());
                prop_assert!(a.satisfies(&d));
            }
            Err(report) => {
                prop_assert!(!garp.passes());
                prop_assert!(report.cycle().is_some());
            }
        }
    }

    #[test]
    fn utility_rationalizes_its_data(d in dataset(), seed in 0u64..1000) {
        if let Ok(a) = rationalize_seeded(&d, seed) {
            let u = build_utility(&a, &d).unwrap();
            for o in d.observations() {
                let (_, best) = u.maximize(&o.price, &o.income()).unwrap();
                prop_assert_eq!(u.eval(&o.bundle), best);
            }
        }
    }

    #[test]
    fn solver_returns_exactly_one_checkable_branch(p in system()) {
        match solve(&p) {
            FeasibilityOutcome::Primal(w) => prop_assert!(p.is_witness(&w.v)),
            FeasibilityOutcome::Dual(c) => {
                prop_assert!(p.is_certificate(&c.strict_weights, &c.weak_weights))
            }
        }
    }

    #[test]
    fn robust_rankings_hold_for_sampled_utilities(
        d in dataset_with(2, 3),
        x in vector(2, 0, 6),
        y in vector(2, 0, 6),
        seeds in prop::collection::vec(0u64..1000, 3),
    ) {
        prop_assume!(check_garp(&d).passes());
        let verdict = rank_robust(&d, &x, &y).unwrap();
        let cert = Certificate::from_rank(&d, &x, &y, &verdict).unwrap();
        let g = GroupDataset::new(vec![d.clone()]).unwrap();
        prop_assert!(cert.verify(&g));
        if verdict.answer == RankAnswer::RobustlyBetter {
            for s in seeds {
                let u = build_utility(&rationalize_seeded(&d, s).unwrap(), &d).unwrap();
                prop_assert!(u.eval(&x) > u.eval(&y));
            }
        }
    }

    #[test]
    fn certificates_survive_serialization(d in dataset()) {
        let cert = Certificate::from_garp(&d);
        let text = serde_json::to_string(&cert).unwrap();
        let back: Certificate = serde_json::from_str(&text).unwrap();
        let g = GroupDataset::new(vec![d]).unwrap();
        prop_assert!(back.verify(&g));
        prop_assert_eq!(back, cert);
    }

    #[test]
    fn aggregate_sums_bundles(g in common_price_group()) {
        let agg = aggregate_dataset(&g).unwrap();
        for (k, o) in agg.observations().iter().enumerate() {
            let sum = g.agents().iter().fold(RVector::zeros(g.dim()), |acc, d| acc.add(&d.obs(k).bundle));
            prop_assert_eq!(&o.bundle, &sum);
            prop_assert_eq!(&o.price, &g.agents()[0].obs(k).price);
        }
    }

    #[test]
    fn representable_groups_share_a_rationalizable_union(g in common_price_group()) {
        let verdict = representative_consumer(&g);
        if verdict.answer == RepAnswer::Representable {
            let small = verdict.small_agent.clone().unwrap();
            let union = union_dataset(&g, &small).unwrap();
            prop_assert!(verdict.shared.as_ref().unwrap().satisfies(&union));
            prop_assert!(Certificate::from_representative(&verdict).unwrap().verify(&g));
        }
    }

    #[test]
    fn efficiency_certificates_verify(seed in 0u64..500, n in 1usize..=3) {
        let e = gen_economy(seed, n, 2, 2);
        let verdict = possibly_efficient(&e.group, &e.allocation).unwrap();
        prop_assert!(Certificate::from_efficiency(&e.allocation, &verdict).unwrap().verify(&e.group));
    }

    #[test]
    fn any_price_is_consistent_with_rationalizable_data(
        seed in 0u64..500,
        p in positive(2),
    ) {
        let e = gen_economy(seed, 2, 2, 2);
        prop_assert!(consistent_price(&e.group, &e.endowments, &p).unwrap());
    }
}
