//! Workloads shared by the benchmarks.

use causal_ident::graph::{closure, Direction};
use causal_ident::{parse_diagram, random_diagram, DiagramShape, ExpandedGraph, NodeSet, Query};

/// Random diagrams with `1.4 n` edges and `n / 5` arcs, each paired with a
/// query whose target descends from the action.
pub fn descendant_queries(nodes: usize, count: usize, seed: u64) -> Vec<(ExpandedGraph, Query)> {
    let shape = DiagramShape {
        nodes,
        edges: nodes * 7 / 5,
        bidirected: nodes / 5,
    };
    let mut out = Vec::with_capacity(count);
    let mut s = seed;
    while out.len() < count {
        s += 1;
        let g = random_diagram(shape, s).expand_latents();
        let x = (s as usize * 7919) % nodes;
        let desc = closure(&g, &NodeSet::from([x]), Direction::Descendants, false);
        let Some(&y) = desc.iter().find(|&&v| v < nodes) else { continue };
        let q = Query::new(&g, x, NodeSet::from([y]), NodeSet::new()).expect("x and y differ");
        out.push((g, q));
    }
    out
}

/// A named diagram and query, parsed from the line format.
pub fn named(src: &str, x: &str, y: &[&str]) -> (ExpandedGraph, Query) {
    let g = parse_diagram(src).expect("valid diagram").expand_latents();
    let q = Query::by_name(&g, x, y, &[]).expect("valid query");
    (g, q)
}

pub const LATENT_SPRINKLER: &str = "node X2 X3 X4 X5\nX2 -> X4\nX3 -> X4\nX4 -> X5\nX2 <-> X3";
pub const FRONT_DOOR: &str = "node X Z Y\nX -> Z\nZ -> Y\nX <-> Y";
pub const NESTED_BLOCKER: &str = "node X M B Y\nX -> M\nM -> B\nB -> Y\nX -> Y\nX <-> B";
pub const BOW: &str = "node X Y\nX -> Y\nX <-> Y";
