//! Brute-force oracles shared by the integration tests. Nothing here calls
//! the library's search or elimination code.
#![allow(dead_code)]

use causal_ident::oracle::DiscreteModel;
use causal_ident::{parse_diagram, random_diagram, CausalDiagram, Dag, DiagramShape, ExpandedGraph, NodeSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn graph(src: &str) -> ExpandedGraph {
    parse_diagram(src).unwrap().expand_latents()
}

pub const SPRINKLER: &str = "node X1 X2 X3 X4 X5\nX1 -> X2\nX1 -> X3\nX2 -> X4\nX3 -> X4\nX4 -> X5";
pub const LATENT_SPRINKLER: &str = "node X2 X3 X4 X5\nX2 <-> X3\nX2 -> X4\nX3 -> X4\nX4 -> X5";
pub const FRONT_DOOR: &str = "node X Z Y\nX -> Z\nZ -> Y\nX <-> Y";
pub const BOW: &str = "node X Y\nX -> Y\nX <-> Y";

fn descendants(g: &ExpandedGraph, v: usize) -> NodeSet {
    let mut out = NodeSet::from([v]);
    let mut stack = vec![v];
    while let Some(u) = stack.pop() {
        for &c in g.children(u) {
            if out.insert(c) {
                stack.push(c);
            }
        }
    }
    out
}

/// d-separation by listing every simple path and checking each interior node.
pub fn dsep_by_paths(g: &ExpandedGraph, a: &NodeSet, b: &NodeSet, given: &NodeSet) -> bool {
    let n = g.node_count();
    let neighbours: Vec<Vec<usize>> = (0..n)
        .map(|v| g.parents(v).iter().chain(g.children(v)).copied().collect())
        .collect();
    let open_at = |prev: usize, mid: usize, next: usize| {
        let collider = g.parents(mid).contains(&prev) && g.parents(mid).contains(&next);
        if collider {
            descendants(g, mid).iter().any(|d| given.contains(d))
        } else {
            !given.contains(&mid)
        }
    };
    fn walk(
        path: &mut Vec<usize>,
        on_path: &mut Vec<bool>,
        neighbours: &[Vec<usize>],
        b: &NodeSet,
        open_at: &dyn Fn(usize, usize, usize) -> bool,
    ) -> bool {
        let here = *path.last().unwrap();
        if path.len() > 1 && b.contains(&here) {
            return true;
        }
        for &next in &neighbours[here] {
            if on_path[next] {
                continue;
            }
            if path.len() >= 2 && !open_at(path[path.len() - 2], here, next) {
                continue;
            }
            path.push(next);
            on_path[next] = true;
            let found = walk(path, on_path, neighbours, b, open_at);
            on_path[next] = false;
            path.pop();
            if found {
                return true;
            }
        }
        false
    }
    for &s in a {
        let mut on_path = vec![false; n];
        on_path[s] = true;
        if walk(&mut vec![s], &mut on_path, &neighbours, b, &open_at) {
            return false;
        }
    }
    true
}

/// Observed joint by summing the full product over every assignment of
/// every node, latents included. Index layout: first observed node most
/// significant.
pub fn naive_joint(m: &DiscreteModel, actions: &[(usize, usize)]) -> Vec<f64> {
    let g = m.graph();
    let n = g.node_count();
    let cards = m.cards();
    let observed = g.observed_count();
    let mut out = vec![0.0; cards[..observed].iter().product()];
    let mut assign = vec![0usize; n];
    loop {
        let mut p = 1.0;
        for v in 0..n {
            let row = g.parents(v).iter().fold(0, |acc, &u| acc * cards[u] + assign[u]);
            p *= match actions.iter().find(|(a, _)| *a == v) {
                Some(&(_, val)) => f64::from(u8::from(assign[v] == val)),
                None => m.prob(v, row, assign[v]),
            };
        }
        let idx = (0..observed).fold(0, |acc, v| acc * cards[v] + assign[v]);
        out[idx] += p;
        let mut v = n;
        loop {
            if v == 0 {
                return out;
            }
            v -= 1;
            assign[v] += 1;
            if assign[v] < cards[v] {
                break;
            }
            assign[v] = 0;
        }
    }
}

/// Sum of joint entries matching a partial assignment (binary or not).
pub fn mass(values: &[f64], cards: &[usize], fixed: &[(usize, usize)]) -> f64 {
    let mut total = 0.0;
    'entries: for (idx, &p) in values.iter().enumerate() {
        let mut rest = idx;
        let mut digits = vec![0; cards.len()];
        for v in (0..cards.len()).rev() {
            digits[v] = rest % cards[v];
            rest /= cards[v];
        }
        for &(v, val) in fixed {
            if digits[v] != val {
                continue 'entries;
            }
        }
        total += p;
    }
    total
}

/// Every assignment of `vars`, as `(node, value)` lists.
pub fn assignments(vars: &[usize], cards: &[usize]) -> Vec<Vec<(usize, usize)>> {
    let mut out = vec![Vec::new()];
    for &v in vars {
        out = out
            .into_iter()
            .flat_map(|a: Vec<(usize, usize)>| {
                (0..cards[v]).map(move |val| {
                    let mut a = a.clone();
                    a.push((v, val));
                    a
                })
            })
            .collect();
    }
    out
}

/// The random diagrams shared by the sweep-style checks: 3 to 7 observed
/// nodes, up to 3 bidirected arcs.
pub fn sweep_corpus(count: usize) -> Vec<CausalDiagram> {
    (0..count as u64)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(1_000 + seed);
            let nodes = rng.random_range(3..=7);
            let shape = DiagramShape {
                nodes,
                edges: rng.random_range(nodes - 1..=2 * nodes),
                bidirected: rng.random_range(0..=3),
            };
            random_diagram(shape, seed)
        })
        .collect()
}

pub fn set(items: &[usize]) -> NodeSet {
    items.iter().copied().collect()
}

/// Sprinkler joint written out factor by factor; `do_x3` clamps X3 and
/// drops its factor. Index layout as in [`naive_joint`].
pub fn sprinkler_product(m: &DiscreteModel, do_x3: Option<usize>) -> Vec<f64> {
    let mut out = vec![0.0; 32];
    for (idx, slot) in out.iter_mut().enumerate() {
        let [x1, x2, x3, x4, x5] = [4, 3, 2, 1, 0].map(|s| (idx >> s) & 1);
        let x3_factor = match do_x3 {
            Some(v) => f64::from(u8::from(x3 == v)),
            None => m.prob(2, x1, x3),
        };
        *slot = m.prob(0, 0, x1) * m.prob(1, x1, x2) * x3_factor * m.prob(3, x2 * 2 + x3, x4) * m.prob(4, x4, x5);
    }
    out
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest pointwise gap between the two sides of the distributional
/// identity a rule licenses, with `y, z, x, w` disjoint observed sets:
///
/// * rule 1: `P(y | do(x), z, w) = P(y | do(x), w)`
/// * rule 2: `P(y | do(x), do(z), w) = P(y | do(x), z, w)`
/// * rule 3: `P(y | do(x), do(z), w) = P(y | do(x), w)`
pub fn rule_identity_gap(m: &DiscreteModel, rule: causal_ident::Rule, y: &NodeSet, z: &NodeSet, x: &NodeSet, w: &NodeSet) -> f64 {
    use causal_ident::{interventional_many, Rule};
    let cards = &m.cards()[..m.graph().observed_count()];
    let joint = |actions: &[(usize, usize)]| interventional_many(m, actions).unwrap().values().to_vec();
    let cond = |d: &[f64], target: &[(usize, usize)], given: &[(usize, usize)]| {
        let both: Vec<(usize, usize)> = target.iter().chain(given).copied().collect();
        mass(d, cards, &both) / mass(d, cards, given)
    };
    let list = |s: &NodeSet| s.iter().copied().collect::<Vec<_>>();
    let mut worst: f64 = 0.0;
    for ax in assignments(&list(x), cards) {
        let base = joint(&ax);
        for az in assignments(&list(z), cards) {
            let acted: Vec<(usize, usize)> = ax.iter().chain(&az).copied().collect();
            let both = joint(&acted);
            for ay in assignments(&list(y), cards) {
                for aw in assignments(&list(w), cards) {
                    let zw: Vec<(usize, usize)> = az.iter().chain(&aw).copied().collect();
                    let (lhs, rhs) = match rule {
                        Rule::One => (cond(&base, &ay, &zw), cond(&base, &ay, &aw)),
                        Rule::Two => (cond(&both, &ay, &aw), cond(&base, &ay, &zw)),
                        Rule::Three => (cond(&both, &ay, &aw), cond(&base, &ay, &aw)),
                    };
                    worst = worst.max((lhs - rhs).abs());
                }
            }
        }
    }
    worst
}
