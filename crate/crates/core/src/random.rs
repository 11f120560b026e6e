//! Seeded random diagrams for sweeps and benchmarks.

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::CausalDiagram;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DiagramShape {
    pub nodes: usize,
    /// Directed edges; capped at `nodes * (nodes - 1) / 2`.
    pub edges: usize,
    /// Bidirected arcs; capped the same way.
    pub bidirected: usize,
}

/// A random acyclic diagram named `V1..Vn`. Edges follow a hidden random
/// order, so declaration order is generally not topological.
pub fn random_diagram(shape: DiagramShape, seed: u64) -> CausalDiagram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.nodes;
    let pairs = n * n.saturating_sub(1) / 2;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut b = CausalDiagram::builder();
    for i in 0..n {
        b.node(&format!("V{}", i + 1)).expect("fresh names");
    }
    for k in index::sample(&mut rng, pairs, shape.edges.min(pairs)) {
        let (i, j) = unrank_pair(k);
        b.edge(order[i], order[j]).expect("distinct pairs");
    }
    for k in index::sample(&mut rng, pairs, shape.bidirected.min(pairs)) {
        let (i, j) = unrank_pair(k);
        b.bidirected(i, j).expect("distinct pairs");
    }
    b.build().expect("edges follow a total order")
}

/// The `k`-th pair `(i, j)` with `i < j`, enumerated by `j` then `i`.
fn unrank_pair(k: usize) -> (usize, usize) {
    let mut j = 1;
    while j * (j + 1) / 2 <= k {
        j += 1;
    }
    (k - j * (j - 1) / 2, j)
}
