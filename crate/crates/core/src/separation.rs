//! d-separation, back-door blocking and minimal blocking-set construction.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::GraphError;
use crate::graph::{closure, Dag, Direction, ExpandedGraph, NodeSet, Surgery};

/// `a ⟂ b | given`, validated against a graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparationQuery {
    pub a: NodeSet,
    pub b: NodeSet,
    pub given: NodeSet,
}

impl SeparationQuery {
    pub fn new(g: &ExpandedGraph, a: NodeSet, b: NodeSet, given: NodeSet) -> Result<Self, GraphError> {
        if a.is_empty() {
            return Err(GraphError::EmptySet("first separation set"));
        }
        if b.is_empty() {
            return Err(GraphError::EmptySet("second separation set"));
        }
        check_observed(g, [&a, &b, &given])?;
        check_disjoint(g, [&a, &b, &given])?;
        Ok(SeparationQuery { a, b, given })
    }
}

pub(crate) fn check_observed<'a>(
    g: &ExpandedGraph,
    sets: impl IntoIterator<Item = &'a NodeSet>,
) -> Result<(), GraphError> {
    for set in sets {
        for &v in set {
            if v >= g.node_count() {
                return Err(GraphError::UnknownNode(format!("#{v}")));
            }
            if g.is_latent(v) {
                return Err(GraphError::LatentNode(g.node_name(v).to_string()));
            }
        }
    }
    Ok(())
}

pub(crate) fn check_disjoint<'a, const N: usize>(
    g: &ExpandedGraph,
    sets: [&'a NodeSet; N],
) -> Result<(), GraphError> {
    for i in 0..N {
        for j in i + 1..N {
            if let Some(&v) = sets[i].intersection(sets[j]).next() {
                return Err(GraphError::Overlap(g.node_name(v).to_string()));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Travel {
    /// Arrived from a child (moving against the arrow).
    Up,
    /// Arrived from a parent.
    Down,
}

/// Reachability along active trails from `sources` given `given`, in the
/// style of the Bayes-ball algorithm. Runs in O(V + E).
struct TrailSearch {
    reached: Vec<bool>,
    /// Predecessor state per (node, travel) slot, for path witnesses.
    pred: Vec<Option<usize>>,
}

fn slot(v: usize, t: Travel) -> usize {
    2 * v + (t == Travel::Down) as usize
}

fn trail_search<G: Dag>(g: &G, sources: &NodeSet, given: &NodeSet) -> TrailSearch {
    let n = g.node_count();
    let mut conditioned = vec![false; n];
    for &v in given {
        conditioned[v] = true;
    }
    let mut opens_collider = vec![false; n];
    for v in closure(g, given, Direction::Ancestors, true) {
        opens_collider[v] = true;
    }
    let mut visited = vec![false; 2 * n];
    let mut pred = vec![None; 2 * n];
    let mut reached = vec![false; n];
    let mut queue: VecDeque<(usize, Travel)> = sources.iter().map(|&s| (s, Travel::Up)).collect();
    for &s in sources {
        visited[slot(s, Travel::Up)] = true;
    }
    let mut push = |queue: &mut VecDeque<(usize, Travel)>, from: usize, w: usize, t: Travel| {
        let k = slot(w, t);
        if !visited[k] {
            visited[k] = true;
            pred[k] = Some(from);
            queue.push_back((w, t));
        }
    };
    while let Some((v, travel)) = queue.pop_front() {
        let here = slot(v, travel);
        if !conditioned[v] {
            reached[v] = true;
        }
        match travel {
            Travel::Up if !conditioned[v] => {
                for &p in g.parents(v) {
                    push(&mut queue, here, p, Travel::Up);
                }
                for &c in g.children(v) {
                    push(&mut queue, here, c, Travel::Down);
                }
            }
            Travel::Up => {}
            Travel::Down => {
                if !conditioned[v] {
                    for &c in g.children(v) {
                        push(&mut queue, here, c, Travel::Down);
                    }
                }
                if opens_collider[v] {
                    for &p in g.parents(v) {
                        push(&mut queue, here, p, Travel::Up);
                    }
                }
            }
        }
    }
    TrailSearch { reached, pred }
}

/// Unvalidated d-separation test used on engine-internal sets.
pub(crate) fn separated<G: Dag>(g: &G, a: &NodeSet, b: &NodeSet, given: &NodeSet) -> bool {
    let search = trail_search(g, a, given);
    !b.iter().any(|&v| search.reached[v])
}

/// True iff `q.given` d-separates `q.a` from `q.b` in `g`.
pub fn d_separated(g: &ExpandedGraph, q: &SeparationQuery) -> bool {
    separated(g, &q.a, &q.b, &q.given)
}

/// An active path from some `a` node to some `b` node, if one exists.
/// The path may pass through latent nodes.
pub fn active_path<G: Dag>(g: &G, a: &NodeSet, b: &NodeSet, given: &NodeSet) -> Option<Vec<usize>> {
    let search = trail_search(g, a, given);
    let end = b.iter().copied().find(|&v| search.reached[v])?;
    let mut k = [slot(end, Travel::Up), slot(end, Travel::Down)]
        .into_iter()
        .find(|&k| search.pred[k].is_some() || a.contains(&(k / 2)))?;
    let mut path = vec![k / 2];
    while let Some(p) = search.pred[k] {
        path.push(p / 2);
        k = p;
    }
    path.reverse();
    Some(path)
}

/// True iff some node of `to` is a proper descendant of `from`.
pub fn has_directed_path<G: Dag>(g: &G, from: usize, to: &NodeSet) -> bool {
    let desc = closure(g, &NodeSet::from([from]), Direction::Descendants, false);
    to.iter().any(|v| desc.contains(v))
}

/// True iff `z` blocks every back-door path from `x` to `y`, i.e.
/// `(X ⟂ Y | Z)` once the outgoing arrows of `x` are removed.
pub fn backdoor_blocked(g: &ExpandedGraph, x: usize, y: &NodeSet, z: &NodeSet) -> Result<bool, GraphError> {
    let xs = NodeSet::from([x]);
    SeparationQuery::new(g, xs.clone(), y.clone(), z.clone())?;
    Ok(backdoor_blocked_unchecked(g, &xs, y, z))
}

pub(crate) fn backdoor_blocked_unchecked(g: &ExpandedGraph, x: &NodeSet, y: &NodeSet, z: &NodeSet) -> bool {
    separated(&g.mutilate(&NodeSet::new(), x), x, y, z)
}

/// Why the blocking-set construction gave up.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockingFailure {
    /// A target is an unblockable parent on the source side (step c).
    TargetHitSource,
    /// A source is an unblockable parent on the target side (step f).
    TargetHitTarget,
    /// The candidate set leaves a back-door path open (step h).
    ResidualPath,
}

impl std::fmt::Display for BlockingFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BlockingFailure::TargetHitSource => "target-hit (source side)",
            BlockingFailure::TargetHitTarget => "target-hit (target side)",
            BlockingFailure::ResidualPath => "residual-path",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "outcome", content = "value")]
pub enum BlockingSetResult {
    Found(NodeSet),
    Fail(BlockingFailure),
}

impl BlockingSetResult {
    pub fn found(&self) -> Option<&NodeSet> {
        match self {
            BlockingSetResult::Found(b) => Some(b),
            BlockingSetResult::Fail(_) => None,
        }
    }
}

/// Polynomial construction of a minimal set blocking every back-door path
/// from `sources` to `targets`.
///
/// The construction runs on the graph after `surgery` and after the
/// outgoing arrows of the sources are removed:
///
/// 1. Starting from the sources, collect their observed parents. Any node
///    that shares a latent parent with a collected "unblockable" node, or is
///    forbidden, cannot serve as a blocker; it joins the unblockable side and
///    contributes its own parents instead. Repeat to a fixpoint.
/// 2. Fail if a target was collected as a candidate blocker, then mirror the
///    collection from the targets and fail if a source was collected.
/// 3. Take the union of both candidate sets, check that it separates, then
///    greedily delete members (in `deletion_order`) while separation holds,
///    repeating passes until nothing more can go.
#[derive(Clone, Debug)]
pub struct BlockingSetFinder<'g> {
    graph: &'g ExpandedGraph,
    sources: NodeSet,
    targets: NodeSet,
    forbidden: NodeSet,
    conditioned: NodeSet,
    surgery: Surgery,
    deletion_order: Option<Vec<usize>>,
}

impl<'g> BlockingSetFinder<'g> {
    pub fn new(graph: &'g ExpandedGraph, sources: NodeSet, targets: NodeSet) -> Self {
        BlockingSetFinder {
            graph,
            sources,
            targets,
            forbidden: NodeSet::new(),
            conditioned: NodeSet::new(),
            surgery: Surgery::none(),
            deletion_order: None,
        }
    }

    /// Nodes that may never enter the blocking set.
    pub fn forbidden(mut self, forbidden: NodeSet) -> Self {
        self.forbidden = forbidden;
        self
    }

    /// Nodes that are conditioned on in every separation test but never
    /// reported as part of the set.
    pub fn conditioned(mut self, conditioned: NodeSet) -> Self {
        self.conditioned = conditioned;
        self
    }

    pub fn surgery(mut self, surgery: Surgery) -> Self {
        self.surgery = surgery;
        self
    }

    /// Priority order for the greedy deletion pass; nodes absent from the
    /// list are visited afterwards in declaration order.
    pub fn deletion_order(mut self, order: Option<Vec<usize>>) -> Self {
        self.deletion_order = order;
        self
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        if self.sources.is_empty() {
            return Err(GraphError::EmptySet("blocking-set sources"));
        }
        if self.targets.is_empty() {
            return Err(GraphError::EmptySet("blocking-set targets"));
        }
        check_observed(
            self.graph,
            [&self.sources, &self.targets, &self.forbidden, &self.conditioned],
        )?;
        check_disjoint(self.graph, [&self.sources, &self.targets, &self.forbidden])?;
        check_disjoint(self.graph, [&self.sources, &self.targets, &self.conditioned])?;
        check_observed(self.graph, [&self.surgery.cut_incoming, &self.surgery.cut_outgoing])
    }

    pub fn run(&self) -> Result<BlockingSetResult, GraphError> {
        self.validate()?;
        Ok(self.run_unchecked())
    }

    /// Steps (a) to (h): the candidate set before any deletion, which does
    /// not depend on the deletion order. Also returns the graph the tests
    /// run in.
    pub(crate) fn unminimized(&self) -> Result<(ExpandedGraph, NodeSet), BlockingFailure> {
        let base = self.surgery.apply(self.graph);
        let g = base.mutilate(&NodeSet::new(), &self.sources);

        let (_, r2) = collect_candidates(&g, &self.sources, &self.forbidden);
        if r2.iter().any(|v| self.targets.contains(v)) {
            return Err(BlockingFailure::TargetHitSource);
        }
        let (_, r4) = collect_candidates(&g, &self.targets, &self.forbidden);
        if r4.iter().any(|v| self.sources.contains(v)) {
            return Err(BlockingFailure::TargetHitTarget);
        }

        let blockers: NodeSet = r2
            .union(&r4)
            .filter(|v| {
                !self.sources.contains(v)
                    && !self.targets.contains(v)
                    && !self.conditioned.contains(v)
                    && !self.forbidden.contains(v)
            })
            .copied()
            .collect();
        let given: NodeSet = blockers.union(&self.conditioned).copied().collect();
        if !separated(&g, &self.sources, &self.targets, &given) {
            return Err(BlockingFailure::ResidualPath);
        }
        Ok((g, blockers))
    }

    pub(crate) fn run_unchecked(&self) -> BlockingSetResult {
        let (g, mut blockers) = match self.unminimized() {
            Ok(found) => found,
            Err(failure) => return BlockingSetResult::Fail(failure),
        };
        let blocks = |set: &NodeSet| {
            let given: NodeSet = set.union(&self.conditioned).copied().collect();
            separated(&g, &self.sources, &self.targets, &given)
        };

        let order = self.visit_order();
        loop {
            let mut removed = false;
            for &b in &order {
                if !blockers.contains(&b) {
                    continue;
                }
                blockers.remove(&b);
                if blocks(&blockers) {
                    removed = true;
                } else {
                    blockers.insert(b);
                }
            }
            if !removed {
                break;
            }
        }
        BlockingSetResult::Found(blockers)
    }

    pub(crate) fn visit_order(&self) -> Vec<usize> {
        let n = self.graph.observed_count();
        let mut order: Vec<usize> = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        if let Some(custom) = &self.deletion_order {
            for &v in custom {
                if v < n && !seen[v] {
                    seen[v] = true;
                    order.push(v);
                }
            }
        }
        order.extend((0..n).filter(|&v| !seen[v]));
        order
    }
}

/// Steps (a)/(b) for one side: returns the unblockable side and the
/// candidate blockers.
fn collect_candidates(g: &ExpandedGraph, seeds: &NodeSet, forbidden: &NodeSet) -> (NodeSet, NodeSet) {
    let mut unblockable = seeds.clone();
    let mut candidates: NodeSet = seeds
        .iter()
        .flat_map(|&s| g.observed_parents(s))
        .filter(|p| !unblockable.contains(p))
        .collect();
    loop {
        let mut migrate: Vec<usize> = unblockable
            .iter()
            .flat_map(|&m| g.confounded_with(m))
            .filter(|s| !unblockable.contains(s))
            .collect();
        migrate.extend(candidates.iter().filter(|r| forbidden.contains(r)).copied());
        let mut changed = false;
        for r in migrate {
            if unblockable.insert(r) {
                changed = true;
                candidates.remove(&r);
                for p in g.observed_parents(r) {
                    if !unblockable.contains(&p) {
                        candidates.insert(p);
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    (unblockable, candidates)
}

/// Minimal back-door blocking set for `x` and `y` (no forbidden nodes, no surgery).
pub fn find_minimal_blocking_set(g: &ExpandedGraph, x: usize, y: &NodeSet) -> Result<BlockingSetResult, GraphError> {
    BlockingSetFinder::new(g, NodeSet::from([x]), y.clone()).run()
}

/// Blocking set on a surgically modified graph where `forbidden` nodes may
/// not be used and are treated like latent variables.
pub fn find_blocking_set_with_forbidden(
    g: &ExpandedGraph,
    a: &NodeSet,
    b: &NodeSet,
    forbidden: &NodeSet,
    surgery: &Surgery,
) -> Result<BlockingSetResult, GraphError> {
    BlockingSetFinder::new(g, a.clone(), b.clone())
        .forbidden(forbidden.clone())
        .surgery(surgery.clone())
        .run()
}
