//! Fully parameterized discrete models on the latent-expanded graph, used as
//! ground truth for estimands and as counterexamples for negative verdicts.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::error::ParseError;
use crate::estimand::{evaluate_over, Distribution, Estimand, EvalError, Table, Term};
use crate::graph::{topological_order, CausalDiagram, Dag, ExpandedGraph, NodeId, NodeSet};
use crate::identify::Query;
use crate::parse::parse_diagram;

/// Joint tables larger than this many binary-equivalent dimensions are refused.
pub const MAX_TABLE_BITS: f64 = 22.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("cardinality must be at least 2")]
    Cardinality,
    #[error("probability floor {min_prob} is infeasible for cardinality {card}")]
    InfeasibleFloor { min_prob: f64, card: usize },
    #[error("table over {bits:.1} binary dimensions exceeds the limit of {MAX_TABLE_BITS}")]
    TooLarge { bits: f64 },
    #[error("{observed} observed nodes exceed the search ceiling of {ceiling}")]
    TooManyNodes { observed: usize, ceiling: usize },
    #[error("value {value} is out of range for {node}")]
    ValueOutOfRange { node: String, value: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("model text line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("model text: {0}")]
    Diagram(#[from] ParseError),
}

/// Conditional probability tables for every node of an expanded graph.
///
/// `cpts[v]` holds one row per assignment of `v`'s parents (in the graph's
/// parent order, first parent most significant) and `cards[v]` entries per
/// row.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteModel {
    graph: ExpandedGraph,
    cards: Vec<usize>,
    cpts: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelSpec {
    pub observed_card: usize,
    pub latent_card: usize,
    /// Every CPT entry is at least this.
    pub min_prob: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            observed_card: 2,
            latent_card: 2,
            min_prob: 0.02,
        }
    }
}

impl DiscreteModel {
    pub fn graph(&self) -> &ExpandedGraph {
        &self.graph
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn cpt(&self, v: usize) -> &[f64] {
        &self.cpts[v]
    }

    /// Number of parent assignments of `v`.
    pub fn rows(&self, v: usize) -> usize {
        self.graph.parents(v).iter().map(|&p| self.cards[p]).product()
    }

    /// `P(v = value | parents = row)`.
    pub fn prob(&self, v: usize, row: usize, value: usize) -> f64 {
        self.cpts[v][row * self.cards[v] + value]
    }

    fn observed_bits(&self) -> f64 {
        (0..self.graph.observed_count()).map(|v| (self.cards[v] as f64).log2()).sum()
    }

    pub fn min_entry(&self) -> f64 {
        self.cpts.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }
}

/// A random positive model. Rows are drawn from a flat Dirichlet and mapped
/// affinely onto `[min_prob, 1]`, so every entry is at least `min_prob`.
pub fn random_model(g: &ExpandedGraph, seed: u64, spec: &ModelSpec) -> Result<DiscreteModel, OracleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_model_with(g, &mut rng, spec)
}

fn random_model_with(g: &ExpandedGraph, rng: &mut ChaCha8Rng, spec: &ModelSpec) -> Result<DiscreteModel, OracleError> {
    for card in [spec.observed_card, spec.latent_card] {
        if card < 2 {
            return Err(OracleError::Cardinality);
        }
        if !(spec.min_prob >= 0.0 && spec.min_prob * (card as f64) < 1.0) {
            return Err(OracleError::InfeasibleFloor {
                min_prob: spec.min_prob,
                card,
            });
        }
    }
    let cards: Vec<usize> = (0..g.node_count())
        .map(|v| if g.is_latent(v) { spec.latent_card } else { spec.observed_card })
        .collect();
    let mut model = DiscreteModel {
        graph: g.clone(),
        cards,
        cpts: Vec::new(),
    };
    if model.observed_bits() > MAX_TABLE_BITS {
        return Err(OracleError::TooLarge {
            bits: model.observed_bits(),
        });
    }
    for v in 0..g.node_count() {
        let card = model.cards[v];
        let mut table = Vec::with_capacity(model.rows(v) * card);
        for _ in 0..model.rows(v) {
            table.extend(random_row(rng, card, spec.min_prob));
        }
        model.cpts.push(table);
    }
    Ok(model)
}

fn random_row(rng: &mut ChaCha8Rng, card: usize, min_prob: f64) -> Vec<f64> {
    let draws: Vec<f64> = (0..card).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = draws.iter().sum();
    let free = 1.0 - min_prob * card as f64;
    draws.iter().map(|d| min_prob + free * d / total).collect()
}

/// A table over a growing set of variables, last variable fastest.
struct Factor {
    vars: Vec<usize>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    /// Multiplies in `P(v | parents)`, appending `v`.
    fn extend(&self, v: usize, card: usize, parents: &[usize], model_cards: &[usize], entry: impl Fn(usize, usize) -> f64) -> Factor {
        let mut parent_pos = Vec::with_capacity(parents.len());
        let mut parent_stride = vec![1usize; parents.len()];
        for i in (0..parents.len()).rev() {
            if i + 1 < parents.len() {
                parent_stride[i] = parent_stride[i + 1] * model_cards[parents[i + 1]];
            }
        }
        for &p in parents {
            parent_pos.push(self.vars.iter().position(|&u| u == p).expect("parents precede children"));
        }
        // row contribution of each factor digit
        let mut contrib = vec![0usize; self.vars.len()];
        for (k, &pos) in parent_pos.iter().enumerate() {
            contrib[pos] = parent_stride[k];
        }
        let mut values = Vec::with_capacity(self.values.len() * card);
        let mut digits = vec![0usize; self.vars.len()];
        let mut row = 0usize;
        for &w in &self.values {
            for value in 0..card {
                values.push(w * entry(row, value));
            }
            for d in (0..digits.len()).rev() {
                digits[d] += 1;
                row += contrib[d];
                if digits[d] < self.cards[d] {
                    break;
                }
                row -= contrib[d] * digits[d];
                digits[d] = 0;
            }
        }
        let mut vars = self.vars.clone();
        vars.push(v);
        let mut cards = self.cards.clone();
        cards.push(card);
        Factor { vars, cards, values }
    }

    /// Reorders and marginalizes onto `keep`.
    fn project(&self, keep: &[usize]) -> Factor {
        let cards: Vec<usize> = keep
            .iter()
            .map(|v| self.cards[self.vars.iter().position(|u| u == v).unwrap()])
            .collect();
        let mut strides = vec![1usize; keep.len()];
        for i in (0..keep.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * cards[i + 1];
        }
        let mut contrib = vec![0usize; self.vars.len()];
        for (k, v) in keep.iter().enumerate() {
            contrib[self.vars.iter().position(|u| u == v).unwrap()] = strides[k];
        }
        let mut values = vec![0.0; cards.iter().product()];
        let mut digits = vec![0usize; self.vars.len()];
        let mut idx = 0usize;
        for &w in &self.values {
            values[idx] += w;
            for d in (0..digits.len()).rev() {
                digits[d] += 1;
                idx += contrib[d];
                if digits[d] < self.cards[d] {
                    break;
                }
                idx -= contrib[d] * digits[d];
                digits[d] = 0;
            }
        }
        Factor {
            vars: keep.to_vec(),
            cards,
            values,
        }
    }
}

/// Observed joint after replacing the mechanism of each `(node, value)` in
/// `actions` with a point mass; latents are eliminated as soon as their last
/// child has been multiplied in.
fn joint_values(m: &DiscreteModel, actions: &[(usize, usize)]) -> Vec<f64> {
    let g = &m.graph;
    let mut remaining: Vec<usize> = (0..g.node_count()).map(|v| g.children(v).len()).collect();
    let mut f = Factor {
        vars: Vec::new(),
        cards: Vec::new(),
        values: vec![1.0],
    };
    for v in topological_order(g) {
        let card = m.cards[v];
        let parents = g.parents(v);
        f = match actions.iter().find(|(a, _)| *a == v) {
            Some(&(_, value)) => f.extend(v, card, parents, &m.cards, |_, s| if s == value { 1.0 } else { 0.0 }),
            None => {
                let cpt = &m.cpts[v];
                f.extend(v, card, parents, &m.cards, |row, s| cpt[row * card + s])
            }
        };
        if g.is_latent(v) && remaining[v] == 0 {
            let keep: Vec<usize> = f.vars.iter().copied().filter(|&u| u != v).collect();
            f = f.project(&keep);
        }
        for &p in parents {
            remaining[p] -= 1;
            if g.is_latent(p) && remaining[p] == 0 {
                let keep: Vec<usize> = f.vars.iter().copied().filter(|&u| u != p).collect();
                f = f.project(&keep);
            }
        }
    }
    let observed: Vec<usize> = (0..g.observed_count()).collect();
    f.project(&observed).values
}

fn distribution(m: &DiscreteModel, values: Vec<f64>) -> Distribution {
    let n = m.graph.observed_count();
    Distribution::new(
        (0..n).map(|v| m.graph.node_name(v).clone()).collect(),
        m.cards[..n].to_vec(),
        values,
    )
    .expect("a product of normalized CPTs is normalized")
}

/// `P(v)` over the observed nodes, in declaration order.
pub fn joint_observational(m: &DiscreteModel) -> Distribution {
    distribution(m, joint_values(m, &[]))
}

/// `P(v | do(x = value))` over all observed nodes; entries with `x ≠ value`
/// are zero.
pub fn interventional(m: &DiscreteModel, x: usize, value: usize) -> Result<Distribution, OracleError> {
    interventional_many(m, &[(x, value)])
}

/// Truncated factorization for several simultaneous actions.
pub fn interventional_many(m: &DiscreteModel, actions: &[(usize, usize)]) -> Result<Distribution, OracleError> {
    for &(v, value) in actions {
        if v >= m.graph.observed_count() || value >= m.cards[v] {
            return Err(OracleError::ValueOutOfRange {
                node: m.graph.node_name(v.min(m.graph.node_count() - 1)).to_string(),
                value,
            });
        }
    }
    Ok(distribution(m, joint_values(m, actions)))
}

fn names(g: &ExpandedGraph, set: &NodeSet) -> Vec<NodeId> {
    set.iter().map(|&v| g.node_name(v).clone()).collect()
}

/// Output variables of a query: targets and context in declaration order.
pub fn query_outputs(g: &ExpandedGraph, q: &Query) -> Vec<NodeId> {
    names(g, &q.y.union(&q.context).copied().collect())
}

/// `P(y | c)` in `joint`, tabulated over [`query_outputs`].
fn conditional(g: &ExpandedGraph, q: &Query, joint: &Distribution) -> Result<Table, EvalError> {
    let e = Estimand::prob(
        names(g, &q.y).into_iter().map(Term::free).collect(),
        names(g, &q.context).into_iter().map(Term::free).collect(),
    );
    evaluate_over(&e, joint, None, &query_outputs(g, q))
}

/// `P(y | do(x = value), c)` computed by truncated factorization.
pub fn effect(m: &DiscreteModel, q: &Query, value: usize) -> Result<Table, OracleError> {
    let joint = interventional(m, q.x, value)?;
    Ok(conditional(&m.graph, q, &joint)?)
}

/// Max-abs difference between the estimand evaluated on the observational
/// joint and the true interventional conditional, at one value of `x`.
pub fn check_estimand(m: &DiscreteModel, e: &Estimand, q: &Query, x_value: usize) -> Result<f64, OracleError> {
    let obs = joint_observational(m);
    estimand_error(m, e, q, &obs, x_value)
}

/// [`check_estimand`] maximized over every value of `x`.
pub fn max_estimand_error(m: &DiscreteModel, e: &Estimand, q: &Query) -> Result<f64, OracleError> {
    let obs = joint_observational(m);
    let mut worst: f64 = 0.0;
    for value in 0..m.cards[q.x] {
        worst = worst.max(estimand_error(m, e, q, &obs, value)?);
    }
    Ok(worst)
}

fn estimand_error(m: &DiscreteModel, e: &Estimand, q: &Query, obs: &Distribution, x_value: usize) -> Result<f64, OracleError> {
    let got = evaluate_over(e, obs, Some(x_value), &query_outputs(&m.graph, q))?;
    let want = effect(m, q, x_value)?;
    Ok(got.max_abs_diff(&want).expect("both tables range over the query outputs"))
}

/// Two models that agree on the observational joint but not on the effect.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub model_a: DiscreteModel,
    pub model_b: DiscreteModel,
    /// Index of the search trial that produced the pair.
    pub trial: usize,
    pub obs_distance: f64,
    pub effect_distance: f64,
}

impl Witness {
    /// Recomputes `(obs_distance, effect_distance)` from the stored tables.
    pub fn revalidate(&self, q: &Query) -> Result<(f64, f64), OracleError> {
        distances(&self.model_a, &self.model_b, q)
    }
}

fn distances(a: &DiscreteModel, b: &DiscreteModel, q: &Query) -> Result<(f64, f64), OracleError> {
    let obs = joint_observational(a)
        .table()
        .max_abs_diff(joint_observational(b).table())
        .expect("same observed variables");
    Ok((obs, effect_distance(a, b, q)?))
}

fn effect_distance(a: &DiscreteModel, b: &DiscreteModel, q: &Query) -> Result<f64, OracleError> {
    let mut worst: f64 = 0.0;
    for value in 0..a.cards[q.x] {
        let d = effect(a, q, value)?.max_abs_diff(&effect(b, q, value)?).expect("same outputs");
        worst = worst.max(d);
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchConfig {
    /// Number of trials.
    pub budget: usize,
    pub seed: u64,
    /// Largest observational difference accepted as "the same joint".
    pub match_tol: f64,
    /// Smallest effect difference accepted as a disagreement.
    pub gap_min: f64,
    pub latent_card: usize,
    pub min_prob: f64,
    /// Refuse graphs with more observed nodes than this.
    pub max_observed: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            budget: 10_000,
            seed: 0,
            match_tol: 1e-9,
            gap_min: 0.01,
            latent_card: 4,
            min_prob: 0.02,
            max_observed: 6,
        }
    }
}

/// Looks for two binary-observed models with the same observational joint
/// and different `P(y | do(x), c)`.
///
/// Each trial draws model A at random, then builds model B from fresh latent
/// mechanisms and solves for observed mechanisms reproducing A's joint
/// (Gauss-Newton on softmax logits, least-norm steps). If that projection
/// does not converge, an independent random model is tried as B instead.
/// Trials run in parallel; the lowest-index success is returned, so the
/// result does not depend on scheduling. `None` proves nothing.
pub fn search_counterexample(g: &ExpandedGraph, q: &Query, cfg: &SearchConfig) -> Result<Option<Witness>, OracleError> {
    if g.observed_count() > cfg.max_observed {
        return Err(OracleError::TooManyNodes {
            observed: g.observed_count(),
            ceiling: cfg.max_observed,
        });
    }
    let spec = ModelSpec {
        observed_card: 2,
        latent_card: cfg.latent_card,
        min_prob: cfg.min_prob,
    };
    // surface configuration errors before fanning out
    random_model(g, cfg.seed, &spec)?;
    Ok((0..cfg.budget)
        .into_par_iter()
        .find_map_first(|trial| run_trial(g, q, cfg, &spec, trial)))
}

fn run_trial(g: &ExpandedGraph, q: &Query, cfg: &SearchConfig, spec: &ModelSpec, trial: usize) -> Option<Witness> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(trial as u64);
    let a = random_model_with(g, &mut rng, spec).ok()?;
    let target = joint_values(&a, &[]);
    let fresh = random_model_with(g, &mut rng, spec).ok()?;
    let mut b = a.clone();
    for v in g.latent() {
        b.cpts[v] = fresh.cpts[v].clone();
    }
    let b = match project(b, &target, cfg.match_tol) {
        Some(b) => b,
        None => fresh,
    };
    let (obs_distance, effect_distance) = distances(&a, &b, q).ok()?;
    (obs_distance <= cfg.match_tol && effect_distance >= cfg.gap_min).then_some(Witness {
        model_a: a,
        model_b: b,
        trial,
        obs_distance,
        effect_distance,
    })
}

/// Adjusts the observed CPTs of `m` until its observed joint matches `target`.
fn project(mut m: DiscreteModel, target: &[f64], tol: f64) -> Option<DiscreteModel> {
    let observed: Vec<usize> = (0..m.graph.observed_count()).collect();
    let mut theta: Vec<f64> = observed.iter().flat_map(|&v| m.cpts[v].iter().map(|p| p.ln())).collect();
    let apply = |m: &mut DiscreteModel, theta: &[f64]| {
        let mut at = 0;
        for &v in &observed {
            let card = m.cards[v];
            for row in m.cpts[v].chunks_mut(card) {
                let logits = &theta[at..at + card];
                let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let total: f64 = logits.iter().map(|l| (l - top).exp()).sum();
                for (p, l) in row.iter_mut().zip(logits) {
                    *p = (l - top).exp() / total;
                }
                at += card;
            }
        }
    };
    let residual = |m: &mut DiscreteModel, theta: &[f64]| -> DVector<f64> {
        apply(m, theta);
        let joint = joint_values(m, &[]);
        DVector::from_iterator(target.len(), joint.iter().zip(target).map(|(a, b)| a - b))
    };
    let mut r = residual(&mut m, &theta);
    for _ in 0..60 {
        if r.amax() <= tol * 1e-3 {
            break;
        }
        let h = 1e-6;
        let mut jac = DMatrix::zeros(target.len(), theta.len());
        for k in 0..theta.len() {
            let keep = theta[k];
            theta[k] = keep + h;
            let up = residual(&mut m, &theta);
            theta[k] = keep - h;
            let down = residual(&mut m, &theta);
            theta[k] = keep;
            jac.set_column(k, &((up - down) / (2.0 * h)));
        }
        let step = jac.svd(true, true).solve(&(-&r), 1e-12).ok()?;
        let norm = r.norm();
        let mut alpha = 1.0;
        loop {
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + alpha * s).collect();
            let r_trial = residual(&mut m, &trial);
            if r_trial.norm() < norm {
                theta = trial;
                r = r_trial;
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-6 {
                return None;
            }
        }
    }
    apply(&mut m, &theta);
    (r.amax() <= tol).then_some(m)
}

impl DiscreteModel {
    /// Plain-text form: the diagram source, then `card` lines, then one
    /// `cpt` block per node listing rows in lexicographic parent order with
    /// shortest round-trip decimal values.
    pub fn to_text(&self) -> String {
        let g = &self.graph;
        let mut out = String::from("# discrete model\n");
        out.push_str(&diagram_of(g).to_string());
        for v in 0..g.node_count() {
            let _ = writeln!(out, "card {} {}", g.node_name(v), self.cards[v]);
        }
        for v in 0..g.node_count() {
            let parents: Vec<&str> = g.parents(v).iter().map(|&p| g.node_name(p).as_str()).collect();
            let _ = writeln!(out, "cpt {} | {}", g.node_name(v), parents.join(" "));
            let card = self.cards[v];
            let parent_cards: Vec<usize> = g.parents(v).iter().map(|&p| self.cards[p]).collect();
            for (row, probs) in self.cpts[v].chunks(card).enumerate() {
                let key = digits(row, &parent_cards);
                let key: Vec<String> = key.iter().map(usize::to_string).collect();
                let probs: Vec<String> = probs.iter().map(|p| format!("{p}")).collect();
                let _ = writeln!(out, "  {} : {}", key.join(" "), probs.join(" "));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<DiscreteModel, OracleError> {
        let err = |line: usize, message: String| OracleError::Format { line, message };
        let mut source = String::new();
        let mut rest = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("").trim();
            if body.starts_with("card ") || body.starts_with("cpt ") || body.contains(':') {
                rest.push((i + 1, body));
                source.push('\n');
            } else {
                source.push_str(line);
                source.push('\n');
            }
        }
        let g = parse_diagram(&source)?.expand_latents();
        let n = g.node_count();
        let mut cards = vec![0usize; n];
        let mut cpts: Vec<Vec<f64>> = vec![Vec::new(); n];
        let mut current: Option<usize> = None;
        for (line, body) in rest {
            if let Some(spec) = body.strip_prefix("card ") {
                let mut it = spec.split_whitespace();
                let (Some(name), Some(card), None) = (it.next(), it.next(), it.next()) else {
                    return Err(err(line, "expected `card NAME N`".into()));
                };
                let v = g.index_of(name).ok_or_else(|| err(line, format!("unknown node {name}")))?;
                cards[v] = card.parse().map_err(|_| err(line, format!("bad cardinality {card:?}")))?;
            } else if let Some(spec) = body.strip_prefix("cpt ") {
                let (name, parents) = spec.split_once('|').ok_or_else(|| err(line, "expected `cpt NAME | PARENTS`".into()))?;
                let v = g.index_of(name.trim()).ok_or_else(|| err(line, format!("unknown node {}", name.trim())))?;
                let listed: Vec<&str> = parents.split_whitespace().collect();
                let actual: Vec<&str> = g.parents(v).iter().map(|&p| g.node_name(p).as_str()).collect();
                if listed != actual {
                    return Err(err(line, format!("parents of {} are {:?}", name.trim(), actual)));
                }
                current = Some(v);
            } else {
                let v = current.ok_or_else(|| err(line, "row outside a cpt block".into()))?;
                let (_, probs) = body.split_once(':').expect("rows contain a colon");
                for p in probs.split_whitespace() {
                    cpts[v].push(p.parse().map_err(|_| err(line, format!("bad probability {p:?}")))?);
                }
            }
        }
        let m = DiscreteModel { graph: g, cards, cpts };
        for v in 0..n {
            let name = m.graph.node_name(v);
            if m.cards[v] == 0 {
                return Err(err(0, format!("no cardinality for {name}")));
            }
            if m.cpts[v].len() != m.rows(v) * m.cards[v] {
                return Err(err(0, format!("cpt of {name} has {} entries", m.cpts[v].len())));
            }
            for row in m.cpts[v].chunks(m.cards[v]) {
                if row.iter().any(|p| !(*p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                    return Err(err(0, format!("a row of the cpt of {name} is not a distribution")));
                }
            }
        }
        Ok(m)
    }
}

/// Mixed-radix digits of `index`, first digit most significant.
fn digits(mut index: usize, cards: &[usize]) -> Vec<usize> {
    let mut out = vec![0; cards.len()];
    for i in (0..cards.len()).rev() {
        out[i] = index % cards[i];
        index /= cards[i];
    }
    out
}

/// Recovers the diagram an expanded graph was built from.
pub fn diagram_of(g: &ExpandedGraph) -> CausalDiagram {
    let mut b = CausalDiagram::builder();
    for v in g.observed() {
        b.node(g.node_name(v).as_str()).expect("names are unique");
    }
    for (from, to) in g.edges() {
        if !g.is_latent(from) {
            b.edge(from, to).expect("edges are valid");
        }
    }
    for u in g.latent() {
        let (a, c) = g.origin(u).expect("latent nodes record their arc");
        b.bidirected(a, c).expect("arcs are valid");
    }
    b.build().expect("the expanded graph is acyclic")
}
