//! Causal diagrams: an observed DAG plus bidirected arcs standing for
//! unmeasured common causes.
//!
//! Nodes are addressed by dense indices in declaration order, so a
//! [`NodeSet`] (a `BTreeSet<usize>`) iterates in declaration order. Every
//! algorithm in this crate runs on the [`ExpandedGraph`], where each
//! bidirected arc has been replaced by an explicit latent parent of its two
//! endpoints. Latent nodes are appended after all observed nodes.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::GraphError;

/// Set of node indices. Iteration order is declaration order.
pub type NodeSet = BTreeSet<usize>;

/// Prefix reserved for synthesized latent nodes.
pub const LATENT_PREFIX: &str = "_u_";

/// Name of a diagram variable: a letter or underscore followed by letters,
/// digits and underscores.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct NodeId(String);

impl NodeId {
    pub fn new(name: impl Into<String>) -> Result<Self, GraphError> {
        let name = name.into();
        if is_identifier(&name) {
            Ok(NodeId(name))
        } else {
            Err(GraphError::InvalidName(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_latent_name(&self) -> bool {
        self.0.starts_with(LATENT_PREFIX)
    }
}

impl TryFrom<String> for NodeId {
    type Error = GraphError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        NodeId::new(value)
    }
}

impl From<NodeId> for String {
    fn from(value: NodeId) -> Self {
        value.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for NodeId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Read-only adjacency view shared by [`CausalDiagram`] and [`ExpandedGraph`].
pub trait Dag {
    fn node_count(&self) -> usize;
    fn parents(&self, v: usize) -> &[usize];
    fn children(&self, v: usize) -> &[usize];
    fn node_name(&self, v: usize) -> &NodeId;
    fn index_of(&self, name: &str) -> Option<usize>;

    /// Resolves names to indices, failing on the first unknown name.
    fn resolve<S: AsRef<str>>(&self, names: &[S]) -> Result<NodeSet, GraphError>
    where
        Self: Sized,
    {
        names
            .iter()
            .map(|n| {
                self.index_of(n.as_ref())
                    .ok_or_else(|| GraphError::UnknownNode(n.as_ref().to_string()))
            })
            .collect()
    }

    fn names_of(&self, set: &NodeSet) -> Vec<NodeId>
    where
        Self: Sized,
    {
        set.iter().map(|&v| self.node_name(v).clone()).collect()
    }

    /// `{A, B}` rendering of a node set, `∅` when empty.
    fn format_set(&self, set: &NodeSet) -> String
    where
        Self: Sized,
    {
        if set.is_empty() {
            return "∅".to_string();
        }
        let names: Vec<&str> = set.iter().map(|&v| self.node_name(v).as_str()).collect();
        format!("{{{}}}", names.join(", "))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Ancestors,
    Descendants,
}

/// Transitive closure of `seeds` along directed edges.
///
/// # Panics
///
/// If a seed index is out of range.
pub fn closure<G: Dag>(g: &G, seeds: &NodeSet, direction: Direction, include_seeds: bool) -> NodeSet {
    let n = g.node_count();
    let mut seen = vec![false; n];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &s in seeds {
        assert!(s < n, "node index {s} out of range");
        queue.push_back(s);
    }
    // Seeds are not pre-marked: a seed reached from another seed is a strict member.
    let mut out = NodeSet::new();
    while let Some(v) = queue.pop_front() {
        let next = match direction {
            Direction::Ancestors => g.parents(v),
            Direction::Descendants => g.children(v),
        };
        for &w in next {
            if !seen[w] {
                seen[w] = true;
                out.insert(w);
                queue.push_back(w);
            }
        }
    }
    if include_seeds {
        out.extend(seeds.iter().copied());
    }
    out
}

/// Deterministic topological order (Kahn's algorithm, smallest index first).
pub fn topological_order<G: Dag>(g: &G) -> Vec<usize> {
    let n = g.node_count();
    let mut indegree: Vec<usize> = (0..n).map(|v| g.parents(v).len()).collect();
    let mut heap: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&v| indegree[v] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(v)) = heap.pop() {
        order.push(v);
        for &c in g.children(v) {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                heap.push(Reverse(c));
            }
        }
    }
    order
}

fn find_cycle(n: usize, children: &[Vec<usize>]) -> Option<Vec<usize>> {
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; n];
    let mut stack_path: Vec<usize> = Vec::new();
    fn dfs(
        v: usize,
        children: &[Vec<usize>],
        state: &mut [u8],
        path: &mut Vec<usize>,
    ) -> Option<Vec<usize>> {
        state[v] = 1;
        path.push(v);
        for &w in &children[v] {
            if state[w] == 1 {
                let start = path.iter().position(|&p| p == w).unwrap();
                let mut cycle = path[start..].to_vec();
                cycle.push(w);
                return Some(cycle);
            }
            if state[w] == 0 {
                if let Some(c) = dfs(w, children, state, path) {
                    return Some(c);
                }
            }
        }
        path.pop();
        state[v] = 2;
        None
    }
    for v in 0..n {
        if state[v] == 0 {
            if let Some(c) = dfs(v, children, &mut state, &mut stack_path) {
                return Some(c);
            }
        }
    }
    None
}

fn adjacency(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let mut parents = vec![Vec::new(); n];
    let mut children = vec![Vec::new(); n];
    for (a, b) in edges {
        children[a].push(b);
        parents[b].push(a);
    }
    for list in parents.iter_mut().chain(children.iter_mut()) {
        list.sort_unstable();
    }
    (parents, children)
}

/// Observed DAG plus bidirected confounding arcs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CausalDiagram {
    names: Vec<NodeId>,
    index: HashMap<String, usize>,
    directed: Vec<(usize, usize)>,
    bidirected: Vec<(usize, usize)>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl CausalDiagram {
    pub fn builder() -> DiagramBuilder {
        DiagramBuilder::default()
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.names
    }

    /// Directed edges in insertion order.
    pub fn directed_edges(&self) -> &[(usize, usize)] {
        &self.directed
    }

    /// Bidirected arcs in insertion order, each stored with the smaller index first.
    pub fn bidirected_edges(&self) -> &[(usize, usize)] {
        &self.bidirected
    }

    pub fn has_bidirected(&self, a: usize, b: usize) -> bool {
        let key = (a.min(b), a.max(b));
        self.bidirected.contains(&key)
    }

    /// Replaces every bidirected arc by a fresh latent parent of its endpoints.
    pub fn expand_latents(&self) -> ExpandedGraph {
        let n_observed = self.names.len();
        let mut names = self.names.clone();
        let mut taken: HashSet<String> = names.iter().map(|n| n.0.clone()).collect();
        let mut edges = self.directed.clone();
        let mut origin = Vec::with_capacity(self.bidirected.len());
        for (k, &(a, b)) in self.bidirected.iter().enumerate() {
            let mut pair = [self.names[a].as_str(), self.names[b].as_str()];
            pair.sort_unstable();
            let mut name = format!("{LATENT_PREFIX}{}_{}", pair[0], pair[1]);
            if taken.contains(&name) {
                let mut i = 2;
                while taken.contains(&format!("{name}_{i}")) {
                    i += 1;
                }
                name = format!("{name}_{i}");
            }
            taken.insert(name.clone());
            names.push(NodeId(name));
            let u = n_observed + k;
            edges.push((u, a));
            edges.push((u, b));
            origin.push((a, b));
        }
        ExpandedGraph::from_parts(names, n_observed, origin, edges)
    }
}

impl Dag for CausalDiagram {
    fn node_count(&self) -> usize {
        self.names.len()
    }
    fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }
    fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }
    fn node_name(&self, v: usize) -> &NodeId {
        &self.names[v]
    }
    fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

/// Serializes to the line-oriented diagram grammar.
impl fmt::Display for CausalDiagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.names.is_empty() {
            let names: Vec<&str> = self.names.iter().map(NodeId::as_str).collect();
            writeln!(f, "node {}", names.join(" "))?;
        }
        for &(a, b) in &self.directed {
            writeln!(f, "{} -> {}", self.names[a], self.names[b])?;
        }
        for &(a, b) in &self.bidirected {
            writeln!(f, "{} <-> {}", self.names[a], self.names[b])?;
        }
        Ok(())
    }
}

/// Incremental constructor for [`CausalDiagram`]; acyclicity is checked in [`DiagramBuilder::build`].
#[derive(Clone, Debug, Default)]
pub struct DiagramBuilder {
    names: Vec<NodeId>,
    index: HashMap<String, usize>,
    directed: Vec<(usize, usize)>,
    directed_seen: HashSet<(usize, usize)>,
    bidirected: Vec<(usize, usize)>,
}

impl DiagramBuilder {
    /// Declares a node. Declaring the same name twice is an error.
    pub fn node(&mut self, name: &str) -> Result<usize, GraphError> {
        if self.index.contains_key(name) {
            return Err(GraphError::DuplicateNode(name.to_string()));
        }
        self.ensure_node(name)
    }

    /// Returns the index of `name`, declaring it if needed.
    pub fn ensure_node(&mut self, name: &str) -> Result<usize, GraphError> {
        if let Some(&i) = self.index.get(name) {
            return Ok(i);
        }
        let id = NodeId::new(name)?;
        if id.is_latent_name() {
            return Err(GraphError::ReservedName(name.to_string()));
        }
        let i = self.names.len();
        self.index.insert(name.to_string(), i);
        self.names.push(id);
        Ok(i)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn edge(&mut self, from: usize, to: usize) -> Result<(), GraphError> {
        if from == to {
            return Err(GraphError::SelfLoop(self.names[from].to_string()));
        }
        if !self.directed_seen.insert((from, to)) {
            return Err(GraphError::DuplicateEdge(format!(
                "{} -> {}",
                self.names[from], self.names[to]
            )));
        }
        self.directed.push((from, to));
        Ok(())
    }

    pub fn bidirected(&mut self, a: usize, b: usize) -> Result<(), GraphError> {
        if a == b {
            return Err(GraphError::SelfLoop(self.names[a].to_string()));
        }
        let key = (a.min(b), a.max(b));
        if self.bidirected.contains(&key) {
            return Err(GraphError::DuplicateEdge(format!(
                "{} <-> {}",
                self.names[a], self.names[b]
            )));
        }
        self.bidirected.push(key);
        Ok(())
    }

    /// Convenience: declare-on-demand edge by names.
    pub fn edge_by_name(&mut self, from: &str, to: &str) -> Result<(), GraphError> {
        let a = self.ensure_node(from)?;
        let b = self.ensure_node(to)?;
        self.edge(a, b)
    }

    pub fn bidirected_by_name(&mut self, a: &str, b: &str) -> Result<(), GraphError> {
        let a = self.ensure_node(a)?;
        let b = self.ensure_node(b)?;
        self.bidirected(a, b)
    }

    pub fn build(self) -> Result<CausalDiagram, GraphError> {
        let n = self.names.len();
        let (parents, children) = adjacency(n, self.directed.iter().copied());
        if let Some(cycle) = find_cycle(n, &children) {
            return Err(GraphError::Cycle(
                cycle.into_iter().map(|v| self.names[v].to_string()).collect(),
            ));
        }
        Ok(CausalDiagram {
            names: self.names,
            index: self.index,
            directed: self.directed,
            bidirected: self.bidirected,
            parents,
            children,
        })
    }
}

/// The diagram with every bidirected arc made explicit as a latent root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpandedGraph {
    names: Vec<NodeId>,
    index: HashMap<String, usize>,
    n_observed: usize,
    origin: Vec<(usize, usize)>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl ExpandedGraph {
    fn from_parts(
        names: Vec<NodeId>,
        n_observed: usize,
        origin: Vec<(usize, usize)>,
        edges: Vec<(usize, usize)>,
    ) -> Self {
        let n = names.len();
        let (parents, children) = adjacency(n, edges.into_iter());
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.0.clone(), i))
            .collect();
        ExpandedGraph {
            names,
            index,
            n_observed,
            origin,
            parents,
            children,
        }
    }

    pub fn observed_count(&self) -> usize {
        self.n_observed
    }

    pub fn observed(&self) -> NodeSet {
        (0..self.n_observed).collect()
    }

    pub fn latent(&self) -> NodeSet {
        (self.n_observed..self.names.len()).collect()
    }

    pub fn is_latent(&self, v: usize) -> bool {
        v >= self.n_observed
    }

    /// The bidirected arc a latent node was synthesized from.
    pub fn origin(&self, latent: usize) -> Option<(usize, usize)> {
        latent
            .checked_sub(self.n_observed)
            .and_then(|k| self.origin.get(k).copied())
    }

    /// All edges, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .children
            .iter()
            .enumerate()
            .flat_map(|(a, cs)| cs.iter().map(move |&b| (a, b)))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.children[a].binary_search(&b).is_ok()
    }

    /// Observed parents of `v`.
    pub fn observed_parents(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.parents[v].iter().copied().filter(|&p| p < self.n_observed)
    }

    /// Observed nodes sharing a latent parent with `v` in this graph.
    pub fn confounded_with(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.parents[v]
            .iter()
            .copied()
            .filter(|&p| p >= self.n_observed)
            .flat_map(move |u| self.children[u].iter().copied().filter(move |&c| c != v))
    }

    /// Graph surgery: drops every edge `(a, b)` with `b ∈ cut_incoming` or
    /// `a ∈ cut_outgoing`. The receiver is left untouched.
    ///
    /// # Panics
    ///
    /// If a cut node is latent or out of range.
    pub fn mutilate(&self, cut_incoming: &NodeSet, cut_outgoing: &NodeSet) -> ExpandedGraph {
        for &v in cut_incoming.iter().chain(cut_outgoing) {
            assert!(v < self.n_observed, "surgery on non-observed node index {v}");
        }
        if cut_incoming.is_empty() && cut_outgoing.is_empty() {
            return self.clone();
        }
        let edges = self
            .edges()
            .into_iter()
            .filter(|(a, b)| !cut_incoming.contains(b) && !cut_outgoing.contains(a));
        let mut g = ExpandedGraph::from_parts(
            self.names.clone(),
            self.n_observed,
            self.origin.clone(),
            Vec::new(),
        );
        let (parents, children) = adjacency(self.names.len(), edges);
        g.parents = parents;
        g.children = children;
        g
    }

    /// Members of `z` that are not ancestors of any `w` node once the
    /// incoming arrows of `x` are cut.
    pub fn z_given_w(&self, x: &NodeSet, z: &NodeSet, w: &NodeSet) -> Result<NodeSet, GraphError> {
        for (a, b) in [(x, z), (x, w), (z, w)] {
            if let Some(&v) = a.intersection(b).next() {
                return Err(GraphError::Overlap(self.names[v].to_string()));
            }
        }
        for &v in x.iter().chain(z).chain(w) {
            if v >= self.n_observed {
                return Err(GraphError::LatentNode(self.names[v].to_string()));
            }
        }
        if w.is_empty() {
            return Ok(z.clone());
        }
        let cut = self.mutilate(x, &NodeSet::new());
        let ancestors_of_w = closure(&cut, w, Direction::Ancestors, false);
        Ok(z.difference(&ancestors_of_w).copied().collect())
    }
}

/// A pair of cut sets describing a mutilated graph such as `G_{X̄ Z̲}`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Surgery {
    /// Nodes whose incoming arrows are removed.
    pub cut_incoming: NodeSet,
    /// Nodes whose outgoing arrows are removed.
    pub cut_outgoing: NodeSet,
}

impl Surgery {
    pub fn none() -> Self {
        Surgery::default()
    }

    pub fn incoming(nodes: NodeSet) -> Self {
        Surgery {
            cut_incoming: nodes,
            cut_outgoing: NodeSet::new(),
        }
    }

    pub fn outgoing(nodes: NodeSet) -> Self {
        Surgery {
            cut_incoming: NodeSet::new(),
            cut_outgoing: nodes,
        }
    }

    pub fn is_none(&self) -> bool {
        self.cut_incoming.is_empty() && self.cut_outgoing.is_empty()
    }

    pub fn apply(&self, g: &ExpandedGraph) -> ExpandedGraph {
        g.mutilate(&self.cut_incoming, &self.cut_outgoing)
    }

    /// `G[in: X; out: Z]` style label.
    pub fn describe<G: Dag>(&self, g: &G) -> String {
        if self.is_none() {
            return "G".to_string();
        }
        let mut parts = Vec::new();
        if !self.cut_incoming.is_empty() {
            parts.push(format!("cut-in {}", g.format_set(&self.cut_incoming)));
        }
        if !self.cut_outgoing.is_empty() {
            parts.push(format!("cut-out {}", g.format_set(&self.cut_outgoing)));
        }
        format!("G[{}]", parts.join("; "))
    }
}

impl Dag for ExpandedGraph {
    fn node_count(&self) -> usize {
        self.names.len()
    }
    fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }
    fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }
    fn node_name(&self, v: usize) -> &NodeId {
        &self.names[v]
    }
    fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}
