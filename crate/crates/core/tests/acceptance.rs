//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//! Run with `cargo test -p causal-ident --test acceptance`.

mod common;

use std::time::{Duration, Instant};

use causal_ident::graph::{closure, Direction};
use causal_ident::{
    backdoor_blocked, d_separated, find_minimal_blocking_set, identify, identify_with, interventional, max_estimand_error,
    random_diagram, random_model, render, rule_applicable, search_counterexample, BlockingSetFinder, BlockingSetResult, DiagramShape,
    ExpandedGraph, IdentifyOptions, Method, ModelSpec, NodeSet, Query, Rule, SearchConfig, SeparationQuery, Style,
};
use common::{dsep_by_paths, graph, max_diff, rule_identity_gap, sprinkler_product, sweep_corpus, BOW, FRONT_DOOR, LATENT_SPRINKLER, SPRINKLER};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const SWEEP_DIAGRAMS: usize = 300;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn singleton_queries(g: &ExpandedGraph) -> Vec<Query> {
    let n = g.observed_count();
    (0..n)
        .flat_map(|x| (0..n).filter(move |&y| y != x).map(move |y| (x, y)))
        .map(|(x, y)| Query::new(g, x, NodeSet::from([y]), NodeSet::new()).unwrap())
        .collect()
}

fn sprinkler() -> Outcome {
    let start = Instant::now();
    let g = graph(LATENT_SPRINKLER);
    let q = Query::by_name(&g, "X3", &["X4"], &[]).unwrap();
    let v = identify(&g, &q);
    let elapsed = start.elapsed();
    let text = v.estimand().map(|e| render(e, Style::Plain)).unwrap_or_default();
    let pass = v.method() == Some(Method::Condition3) && text == "Σ_{x2} P(x4|x3,x2) P(x2)" && elapsed < Duration::from_millis(100);
    outcome(pass, format!("{:?} {text:?} in {:.2} ms (limit 100 ms)", v.method(), ms(elapsed)))
}

fn truncated_product() -> Outcome {
    let g = graph(SPRINKLER);
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let m = random_model(&g, seed, &ModelSpec::default()).unwrap();
        let done = interventional(&m, 2, 1).unwrap();
        worst = worst.max(max_diff(done.values(), &sprinkler_product(&m, Some(1))));
    }
    outcome(worst <= 1e-12, format!("max pointwise gap {worst:.2e} over 100 models (tol 1e-12)"))
}

fn front_door() -> Outcome {
    let g = graph(FRONT_DOOR);
    let q = Query::by_name(&g, "X", &["Y"], &[]).unwrap();
    let v = identify(&g, &q);
    let Some(e) = v.estimand() else {
        return outcome(false, "not identified".into());
    };
    let text = render(e, Style::Plain);
    let worst = (0..100)
        .map(|seed| max_estimand_error(&random_model(&g, seed, &ModelSpec::default()).unwrap(), e, &q).unwrap())
        .fold(0.0, f64::max);
    let pass = v.method() == Some(Method::Condition4) && text == "Σ_{z} Σ_{x'} P(y|z,x') P(x') P(z|x)" && worst < 1e-9;
    outcome(pass, format!("{text:?}, max error {worst:.2e} over 100 models (tol 1e-9)"))
}

fn master_sweep(corpus: &[ExpandedGraph]) -> Outcome {
    let start = Instant::now();
    let spec = ModelSpec { latent_card: 3, ..ModelSpec::default() };
    let per_graph: Vec<(usize, usize, usize, f64)> = corpus
        .par_iter()
        .map(|g| {
            let (mut queries, mut identified, mut violations, mut worst) = (0, 0, 0, 0.0f64);
            let models: Vec<_> = (0..25).map(|seed| random_model(g, seed, &spec).unwrap()).collect();
            for q in singleton_queries(g) {
                queries += 1;
                let Some(e) = identify(g, &q).estimand().cloned() else { continue };
                identified += 1;
                for m in &models {
                    let err = max_estimand_error(m, &e, &q).unwrap();
                    worst = worst.max(err);
                    violations += usize::from(!(err < 1e-9));
                }
            }
            (queries, identified, violations, worst)
        })
        .collect();
    let elapsed = start.elapsed();
    let queries: usize = per_graph.iter().map(|r| r.0).sum();
    let identified: usize = per_graph.iter().map(|r| r.1).sum();
    let violations: usize = per_graph.iter().map(|r| r.2).sum();
    let worst = per_graph.iter().map(|r| r.3).fold(0.0, f64::max);
    let pass = violations == 0 && elapsed < Duration::from_secs(600);
    outcome(
        pass,
        format!(
            "{} diagrams, {queries} queries, {identified} identified, {violations} violations, max error {worst:.2e}, {:.1} s (limit 600 s)",
            corpus.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn dsep_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut instances, mut mismatches) = (0, 0);
    while instances < 600 {
        let nodes = rng.random_range(2..=8);
        let shape = DiagramShape { nodes, edges: rng.random_range(0..=2 * nodes), bidirected: rng.random_range(0..=3) };
        let g = random_diagram(shape, rng.random()).expand_latents();
        let mut sets = [NodeSet::new(), NodeSet::new(), NodeSet::new()];
        for v in 0..nodes {
            let k = rng.random_range(0..4);
            if k < 3 {
                sets[k].insert(v);
            }
        }
        let [a, b, given] = sets;
        if a.is_empty() || b.is_empty() {
            continue;
        }
        instances += 1;
        let q = SeparationQuery::new(&g, a.clone(), b.clone(), given.clone()).unwrap();
        mismatches += usize::from(d_separated(&g, &q) != dsep_by_paths(&g, &a, &b, &given));
    }
    outcome(mismatches == 0, format!("{instances} instances, {mismatches} mismatches"))
}

fn blocking_minimality(corpus: &[ExpandedGraph]) -> Outcome {
    let (mut found, mut violations) = (0, 0);
    for g in corpus {
        let n = g.observed_count();
        for x in 0..n {
            for y in (0..n).filter(|&y| y != x) {
                let ys = NodeSet::from([y]);
                let BlockingSetResult::Found(b) = find_minimal_blocking_set(g, x, &ys).unwrap() else { continue };
                found += 1;
                let blocks = backdoor_blocked(g, x, &ys, &b).unwrap();
                let minimal = b.iter().all(|v| {
                    let mut smaller = b.clone();
                    smaller.remove(v);
                    !backdoor_blocked(g, x, &ys, &smaller).unwrap()
                });
                violations += usize::from(!(blocks && minimal));
            }
        }
    }
    outcome(violations == 0 && found > 0, format!("{found} sets found, {violations} violations"))
}

fn deletion_order_consistency(corpus: &[ExpandedGraph]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut compared, mut changed, mut sets_differ) = (0, 0, 0);
    for g in corpus {
        let n = g.observed_count();
        let orders: Vec<Vec<usize>> = (0..10)
            .map(|_| {
                let mut o: Vec<usize> = (0..n).collect();
                o.shuffle(&mut rng);
                o
            })
            .collect();
        for q in singleton_queries(g) {
            let base = identify(g, &q).method();
            let ys = q.y.clone();
            let first = find_minimal_blocking_set(g, q.x, &ys).unwrap();
            for order in &orders {
                compared += 1;
                let options = IdentifyOptions { deletion_order: Some(order.clone()), ..IdentifyOptions::default() };
                changed += usize::from(identify_with(g, &q, &options).method() != base);
                let other = BlockingSetFinder::new(g, NodeSet::from([q.x]), ys.clone()).deletion_order(Some(order.clone())).run().unwrap();
                sets_differ += usize::from(other != first);
            }
        }
    }
    outcome(
        changed == 0,
        format!("{compared} (query, order) pairs, {changed} verdict changes, {sets_differ} with a different minimal set"),
    )
}

fn bow_witness() -> Outcome {
    let start = Instant::now();
    let g = graph(BOW);
    let q = Query::by_name(&g, "X", &["Y"], &[]).unwrap();
    let cfg = SearchConfig { budget: 10_000, ..SearchConfig::default() };
    let w = search_counterexample(&g, &q, &cfg).unwrap();
    let elapsed = start.elapsed();
    match w {
        Some(w) => {
            let pass = w.obs_distance <= 1e-9 && w.effect_distance >= 0.01 && elapsed < Duration::from_secs(60);
            outcome(
                pass,
                format!(
                    "trial {}: obs distance {:.2e}, effect distance {:.4}, {:.2} s (limit 60 s)",
                    w.trial,
                    w.obs_distance,
                    w.effect_distance,
                    elapsed.as_secs_f64()
                ),
            )
        }
        None => outcome(false, format!("no witness in 10^4 trials, {:.2} s", elapsed.as_secs_f64())),
    }
}

/// Queries whose target is a proper descendant of the action, so the easy
/// no-directed-path exit is rare.
fn latency_sample(nodes: usize, edges: usize, bidirected: usize, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut times = Vec::new();
    while times.len() < count {
        let g = random_diagram(DiagramShape { nodes, edges, bidirected }, rng.random()).expand_latents();
        let x = rng.random_range(0..nodes);
        let desc: Vec<usize> = closure(&g, &NodeSet::from([x]), Direction::Descendants, false)
            .into_iter()
            .filter(|&v| v < nodes)
            .collect();
        let Some(&y) = desc.get(rng.random_range(0..desc.len().max(1))) else { continue };
        let q = Query::new(&g, x, NodeSet::from([y]), NodeSet::new()).unwrap();
        let start = Instant::now();
        std::hint::black_box(identify(&g, &q));
        times.push(start.elapsed().as_secs_f64());
    }
    times
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 { xs[n / 2] } else { (xs[n / 2 - 1] + xs[n / 2]) / 2.0 }
}

fn polynomial_time() -> Outcome {
    let at50 = median(latency_sample(50, 70, 10, 100, 9));
    let sizes = [10usize, 20, 40, 80];
    let medians: Vec<f64> = sizes.iter().map(|&n| median(latency_sample(n, n * 7 / 5, n / 5, 100, n as u64))).collect();
    let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = medians.iter().map(|t| t.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let per_size: Vec<String> = sizes.iter().zip(&medians).map(|(n, t)| format!("{n}:{:.3}ms", t * 1e3)).collect();
    outcome(
        at50 < 1.0 && slope < 4.0,
        format!("median at 50 nodes {:.3} ms (limit 1 s); log-log slope {slope:.2} (limit 4) [{}]", at50 * 1e3, per_size.join(" ")),
    )
}

fn rule_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut models, mut held, mut violations, mut worst) = (0, [0usize; 3], 0, 0.0f64);
    while models < 200 {
        let nodes = rng.random_range(3..=5);
        let shape = DiagramShape { nodes, edges: rng.random_range(1..=2 * nodes), bidirected: rng.random_range(0..=2) };
        let g = random_diagram(shape, rng.random()).expand_latents();
        let mut sets = [NodeSet::new(), NodeSet::new(), NodeSet::new(), NodeSet::new()];
        for v in 0..nodes {
            let k = rng.random_range(0..5);
            if k < 4 {
                sets[k].insert(v);
            }
        }
        let [y, z, x, w] = &sets;
        if y.is_empty() || z.is_empty() {
            continue;
        }
        models += 1;
        let m = random_model(&g, rng.random(), &ModelSpec::default()).unwrap();
        for (k, rule) in [Rule::One, Rule::Two, Rule::Three].into_iter().enumerate() {
            if rule_applicable(rule, &g, y, z, x, w).unwrap().holds {
                held[k] += 1;
                let gap = rule_identity_gap(&m, rule, y, z, x, w);
                worst = worst.max(gap);
                violations += usize::from(!(gap < 1e-9));
            }
        }
    }
    outcome(
        violations == 0,
        format!(
            "{models} models; rule 1/2/3 held {}/{}/{} times; {violations} violations, max gap {worst:.2e} (tol 1e-9)",
            held[0], held[1], held[2]
        ),
    )
}

fn main() {
    let corpus: Vec<ExpandedGraph> = sweep_corpus(SWEEP_DIAGRAMS).iter().map(|d| d.expand_latents()).collect();
    let criteria: [(&str, &dyn Fn() -> Outcome); 10] = [
        ("sprinkler reproduction", &sprinkler),
        ("truncated factorization", &truncated_product),
        ("front-door estimand", &front_door),
        ("master soundness sweep", &|| master_sweep(&corpus)),
        ("d-separation oracle", &dsep_equivalence),
        ("blocking-set minimality", &|| blocking_minimality(&corpus)),
        ("deletion-order consistency", &|| deletion_order_consistency(&corpus)),
        ("non-identifiability witness", &bow_witness),
        ("polynomial latency", &polynomial_time),
        ("rule semantic soundness", &rule_soundness),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        failed += usize::from(!o.pass);
        println!("[{}] {:>2}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
