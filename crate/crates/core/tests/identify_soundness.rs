mod common;

use causal_ident::{
    identify, identify_with, max_estimand_error, random_diagram, random_model, rule_applicable, DiagramShape, IdentifyOptions, Method,
    ModelSpec, NodeSet, Query, Rule,
};
use common::{graph, mass, rule_identity_gap, sweep_corpus};
use proptest::prelude::*;

fn pick(labels: &[u8], n: usize, label: u8) -> NodeSet {
    (0..n).filter(|&v| labels[v] == label).collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 300, failure_persistence: None, ..ProptestConfig::default() })]

    /// Identifiable verdicts carry replayable certificates and an estimand
    /// that matches truncated factorization, including multi-target and
    /// context-carrying queries.
    #[test]
    fn identifiable_verdicts_are_sound(
        seed in any::<u64>(),
        nodes in 2usize..=6,
        edges in 0usize..=10,
        bidirected in 0usize..=3,
        x in 0usize..6,
        labels in prop::collection::vec(0u8..5, 6),
    ) {
        let g = random_diagram(DiagramShape { nodes, edges, bidirected }, seed).expand_latents();
        prop_assume!(x < nodes);
        let mut labels = labels;
        labels[x] = 4;
        let y = pick(&labels, nodes, 0);
        let context = pick(&labels, nodes, 1);
        prop_assume!(!y.is_empty() && y.len() <= 2 && context.len() <= 1);
        let q = Query::new(&g, x, y, context).unwrap();
        let verdict = identify(&g, &q);
        if let Some(d) = verdict.derivation() {
            for step in d.trace() {
                prop_assert!(step.check.holds && step.check.replays(&g), "{}", step.rewrite);
            }
            d.estimand.validate_complete().unwrap();
            for model_seed in 0..5 {
                let m = random_model(&g, model_seed, &ModelSpec { latent_card: 3, ..ModelSpec::default() }).unwrap();
                let err = max_estimand_error(&m, &d.estimand, &q).unwrap();
                prop_assert!(err < 1e-9, "{} on {}", err, q.describe(&g));
            }
        }
    }
}

/// Where the condition-2 exchange applies, doing equals seeing, computed
/// directly from the joint tables.
#[test]
fn condition_two_means_doing_equals_seeing() {
    let mut checked = 0;
    for d in sweep_corpus(60) {
        let g = d.expand_latents();
        let n = g.observed_count();
        for x in 0..n {
            for y in (0..n).filter(|&y| y != x) {
                let q = Query::new(&g, x, NodeSet::from([y]), NodeSet::new()).unwrap();
                if identify(&g, &q).method() != Some(Method::Condition2) {
                    continue;
                }
                checked += 1;
                for seed in 0..3 {
                    let m = random_model(&g, seed, &ModelSpec::default()).unwrap();
                    let obs = causal_ident::joint_observational(&m);
                    let cards = &m.cards()[..n];
                    for xv in 0..2 {
                        let done = causal_ident::interventional(&m, x, xv).unwrap();
                        for yv in 0..2 {
                            let seen = mass(obs.values(), cards, &[(x, xv), (y, yv)]) / mass(obs.values(), cards, &[(x, xv)]);
                            assert!((mass(done.values(), cards, &[(y, yv)]) - seen).abs() < 1e-9);
                        }
                    }
                }
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn rule_predicates_imply_their_identities() {
    let mut held = [0; 3];
    for seed in 0..120u64 {
        let g = random_diagram(DiagramShape { nodes: 4 + (seed % 2) as usize, edges: 5, bidirected: (seed % 3) as usize }, seed)
            .expand_latents();
        let n = g.observed_count();
        let labels: Vec<usize> = (0..n).map(|v| ((seed as usize).wrapping_mul(2654435761) >> (3 * v)) % 5).collect();
        let sets: Vec<NodeSet> = (0..4).map(|l| (0..n).filter(|&v| labels[v] == l).collect()).collect();
        let [y, z, x, w] = [&sets[0], &sets[1], &sets[2], &sets[3]];
        if y.is_empty() || z.is_empty() {
            continue;
        }
        let m = random_model(&g, seed, &ModelSpec::default()).unwrap();
        for (k, rule) in [Rule::One, Rule::Two, Rule::Three].into_iter().enumerate() {
            if rule_applicable(rule, &g, y, z, x, w).unwrap().holds {
                held[k] += 1;
                assert!(rule_identity_gap(&m, rule, y, z, x, w) < 1e-9, "rule {rule} seed {seed}");
            }
        }
    }
    assert!(held.iter().all(|&h| h > 0), "{held:?}");
}

#[test]
fn deletion_order_does_not_change_verdicts() {
    for d in sweep_corpus(40) {
        let g = d.expand_latents();
        let n = g.observed_count();
        for x in 0..n {
            for y in (0..n).filter(|&y| y != x) {
                let q = Query::new(&g, x, NodeSet::from([y]), NodeSet::new()).unwrap();
                let base = identify(&g, &q).method();
                let reversed = IdentifyOptions { deletion_order: Some((0..n).rev().collect()), ..IdentifyOptions::default() };
                assert_eq!(identify_with(&g, &q, &reversed).method(), base);
            }
        }
    }
}

#[test]
fn reference_figures_identify() {
    let g = graph("node X B1 B2 Y\nX -> Y\nB1 -> X\nB2 -> X\nB1 -> Y\nB2 -> Y\nB1 <-> B2");
    let q = Query::by_name(&g, "X", &["Y"], &[]).unwrap();
    assert!(identify(&g, &q).is_identifiable());
}

#[test]
fn verdicts_round_trip_through_json() {
    for (src, x, y) in [(common::FRONT_DOOR, "X", "Y"), (common::BOW, "X", "Y"), (common::LATENT_SPRINKLER, "X3", "X4")] {
        let g = graph(src);
        let q = Query::by_name(&g, x, &[y], &[]).unwrap();
        let v = identify(&g, &q);
        let text = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<causal_ident::Verdict>(&text).unwrap(), v);
    }
}
