//! The identification engine.
//!
//! [`identify`] tries four graphical conditions in order on `P(y | do(x), c)`:
//!
//! 1. no directed path from `x` to `y`: the effect is `P(y | c)`;
//! 2. no open back-door path: the effect is `P(y | x, c)`;
//! 3. a minimal back-door blocking set `B` whose own effect `P(b | do(x), c)`
//!    is identifiable (recursively): `Σ_b P(y | x, b, c) P(b | do(x), c)`;
//! 4. a front-door style mediator set `Z1` (the children of `x` that are
//!    ancestors of `y`) with a covariate set `Z2` of non-descendants of `x`:
//!    `Σ_{z1,z2} Σ_{x'} P(y | z1, z2, x', c) P(x' | z2, c) P(z1 | x, z2, c) P(z2 | c)`.
//!
//! When all four fail and there are several targets, the query is factored
//! into a chain `P(y1 | do(x), c) P(y2 | do(x), c, y1) ...` with
//! non-descendants of `x` first and descendants in topological order, and
//! each factor is identified on its own.
//!
//! Every rewrite of an interventional term is justified by a do-calculus rule
//! check that is recorded in the derivation, so an `Identifiable` verdict can
//! be replayed step by step.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::docalculus::{rule2_unchecked, rule3_unchecked, RuleCheck};
use crate::error::GraphError;
use crate::estimand::{default_symbol, substitute, Binding, Estimand, Placeholder, SumVar, Term};
use crate::graph::{closure, topological_order, Dag, Direction, ExpandedGraph, NodeSet};
use crate::separation::{
    active_path, check_disjoint, check_observed, BlockingFailure, BlockingSetFinder, BlockingSetResult,
};

/// `P(y | do(x), context)` for a single intervention variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Query {
    pub x: usize,
    pub y: NodeSet,
    pub context: NodeSet,
}

impl Query {
    pub fn new(g: &ExpandedGraph, x: usize, y: NodeSet, context: NodeSet) -> Result<Self, GraphError> {
        if y.is_empty() {
            return Err(GraphError::EmptySet("query targets"));
        }
        let xs = NodeSet::from([x]);
        check_observed(g, [&xs, &y, &context])?;
        check_disjoint(g, [&xs, &y, &context])?;
        Ok(Query { x, y, context })
    }

    pub fn by_name<S: AsRef<str>>(g: &ExpandedGraph, x: &str, y: &[S], context: &[S]) -> Result<Self, GraphError> {
        let xi = g.index_of(x).ok_or_else(|| GraphError::UnknownNode(x.to_string()))?;
        Query::new(g, xi, g.resolve(y)?, g.resolve(context)?)
    }

    /// `P(y|do(x),c)` with lower-cased labels.
    pub fn describe<G: Dag>(&self, g: &G) -> String {
        let given: Vec<String> = std::iter::once(format!("do({})", symbol(g, self.x)))
            .chain(self.context.iter().map(|&v| symbol(g, v)))
            .collect();
        format!("P({}|{})", labels(g, &self.y).join(","), given.join(","))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "1")]
    Condition1,
    #[serde(rename = "2")]
    Condition2,
    #[serde(rename = "3")]
    Condition3,
    #[serde(rename = "4")]
    Condition4,
    #[serde(rename = "decomposed")]
    Decomposed,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Condition1,
        Method::Condition2,
        Method::Condition3,
        Method::Condition4,
        Method::Decomposed,
    ];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Condition1 => "condition 1",
            Method::Condition2 => "condition 2",
            Method::Condition3 => "condition 3",
            Method::Condition4 => "condition 4",
            Method::Decomposed => "decomposition",
        })
    }
}

/// A certified rewrite of one interventional term.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub rewrite: String,
    pub check: RuleCheck,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Derivation {
    pub query: Query,
    pub method: Method,
    pub estimand: Estimand,
    pub steps: Vec<Step>,
    /// Derivations of the sub-queries this one relies on.
    pub sub: Vec<Derivation>,
}

impl Derivation {
    /// All steps, this derivation's first, then sub-derivations depth first.
    pub fn trace(&self) -> Vec<&Step> {
        let mut out: Vec<&Step> = self.steps.iter().collect();
        for d in &self.sub {
            out.extend(d.trace());
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Failure {
    /// Condition 1: `x` reaches a target along this directed path.
    DirectedPath { path: Vec<usize> },
    /// A rule check the condition depends on does not hold.
    Rule { check: RuleCheck },
    /// Condition 2: this back-door path is open (may pass through latents).
    BackDoorPath { path: Vec<usize> },
    /// Condition 3: the blocking-set construction failed.
    NoBlockingSet { reason: BlockingFailure },
    /// A sub-query this condition needs is not identifiable by the criterion.
    SubQuery { query: Query, failures: Vec<ConditionFailure> },
    /// A sub-query is already being derived further up the stack.
    CyclicSubquery { query: Query },
    /// Condition 4: no child of `x` is an ancestor of a target.
    NoMediators,
    /// Condition 4: a mediator is part of the conditioning context.
    MediatorConditioned { node: usize },
    /// Condition 4: a directed path from `x` to a target avoids the mediators.
    UnmediatedPath { path: Vec<usize> },
    /// Condition 4: the covariate set tried first fails this check.
    NoCovariateSet { z1: NodeSet, z2: NodeSet, check: RuleCheck },
    /// Decomposition needs at least two targets.
    SingleTarget,
    /// Disabled by the caller.
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionFailure {
    pub method: Method,
    pub failure: Failure,
}

impl ConditionFailure {
    pub fn describe(&self, g: &ExpandedGraph) -> String {
        let what = match &self.failure {
            Failure::DirectedPath { path } => format!("directed path {}", format_path(g, path)),
            Failure::Rule { check } => check.describe(g),
            Failure::BackDoorPath { path } => format!("open back-door path {}", format_path(g, path)),
            Failure::NoBlockingSet { reason } => format!("no blocking set ({reason})"),
            Failure::SubQuery { query, failures } => {
                let inner: Vec<String> = failures.iter().map(|f| f.describe(g)).collect();
                format!("{} is not identifiable [{}]", query.describe(g), inner.join("; "))
            }
            Failure::CyclicSubquery { query } => format!("cyclic-subquery {}", query.describe(g)),
            Failure::NoMediators => "no child of the intervention is an ancestor of a target".to_string(),
            Failure::MediatorConditioned { node } => {
                format!("mediator {} is in the conditioning context", g.node_name(*node))
            }
            Failure::UnmediatedPath { path } => format!("unmediated directed path {}", format_path(g, path)),
            Failure::NoCovariateSet { z1, z2, check } => format!(
                "mediators {} with covariates {}: {}",
                g.format_set(z1),
                g.format_set(z2),
                check.describe(g)
            ),
            Failure::SingleTarget => "single target".to_string(),
            Failure::Skipped => "skipped".to_string(),
        };
        format!("{}: {}", self.method, what)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Verdict {
    Identifiable(Derivation),
    NotIdentifiableByCriterion { failures: Vec<ConditionFailure> },
}

impl Verdict {
    pub fn is_identifiable(&self) -> bool {
        matches!(self, Verdict::Identifiable(_))
    }

    pub fn derivation(&self) -> Option<&Derivation> {
        match self {
            Verdict::Identifiable(d) => Some(d),
            Verdict::NotIdentifiableByCriterion { .. } => None,
        }
    }

    pub fn estimand(&self) -> Option<&Estimand> {
        self.derivation().map(|d| &d.estimand)
    }

    pub fn method(&self) -> Option<Method> {
        self.derivation().map(|d| d.method)
    }
}

#[derive(Clone, Debug, Default)]
pub struct IdentifyOptions {
    /// Deletion priority handed to every blocking-set search.
    pub deletion_order: Option<Vec<usize>>,
    /// Methods not tried on the top-level query. Sub-queries use all of them.
    pub skip: Vec<Method>,
}

pub fn identify(g: &ExpandedGraph, q: &Query) -> Verdict {
    identify_with(g, q, &IdentifyOptions::default())
}

pub fn identify_with(g: &ExpandedGraph, q: &Query, options: &IdentifyOptions) -> Verdict {
    let mut engine = Engine {
        g,
        options,
        stack: Vec::new(),
        memo: HashMap::new(),
        cycle_hits: 0,
    };
    match engine.solve(q, &options.skip) {
        Ok(d) => Verdict::Identifiable(d),
        Err(Unsolved::Failed(failures)) => Verdict::NotIdentifiableByCriterion { failures },
        Err(Unsolved::Cyclic) => unreachable!("the top-level query cannot already be on the stack"),
    }
}

#[derive(Clone)]
enum Unsolved {
    Cyclic,
    Failed(Vec<ConditionFailure>),
}

struct Engine<'a> {
    g: &'a ExpandedGraph,
    options: &'a IdentifyOptions,
    stack: Vec<Query>,
    memo: HashMap<Query, Result<Derivation, Unsolved>>,
    /// Incremented whenever the guard rejects a query; results computed while
    /// it changed depend on the stack and are not memoized.
    cycle_hits: usize,
}

impl Engine<'_> {
    fn solve(&mut self, q: &Query, skip: &[Method]) -> Result<Derivation, Unsolved> {
        if self.stack.contains(q) {
            self.cycle_hits += 1;
            return Err(Unsolved::Cyclic);
        }
        if skip.is_empty() {
            if let Some(r) = self.memo.get(q) {
                return r.clone();
            }
        }
        let hits = self.cycle_hits;
        self.stack.push(q.clone());
        let result = self.try_methods(q, skip);
        self.stack.pop();
        if skip.is_empty() && hits == self.cycle_hits {
            self.memo.insert(q.clone(), result.clone());
        }
        result
    }

    fn try_methods(&mut self, q: &Query, skip: &[Method]) -> Result<Derivation, Unsolved> {
        let mut failures = Vec::new();
        for method in Method::ALL {
            let outcome = if skip.contains(&method) {
                Err(Failure::Skipped)
            } else {
                match method {
                    Method::Condition1 => self.condition1(q),
                    Method::Condition2 => self.condition2(q),
                    Method::Condition3 => self.condition3(q),
                    Method::Condition4 => self.condition4(q),
                    Method::Decomposed => self.decompose(q),
                }
            };
            match outcome {
                Ok(d) => return Ok(d),
                Err(failure) => failures.push(ConditionFailure { method, failure }),
            }
        }
        Err(Unsolved::Failed(failures))
    }

    fn descendants(&self, x: usize) -> NodeSet {
        closure(self.g, &NodeSet::from([x]), Direction::Descendants, false)
    }

    fn condition1(&mut self, q: &Query) -> Result<Derivation, Failure> {
        if let Some(path) = directed_path(self.g, q.x, &q.y, &NodeSet::new()) {
            return Err(Failure::DirectedPath { path });
        }
        let xs = NodeSet::from([q.x]);
        let check = rule3_unchecked(self.g, &q.y, &xs, &NodeSet::new(), &q.context);
        if !check.holds {
            return Err(Failure::Rule { check });
        }
        let g = self.g;
        let rewrite = format!(
            "{} = {}",
            text(g, &q.y, &[q.x], &q.context, &[]),
            text(g, &q.y, &[], &q.context, &[])
        );
        Ok(Derivation {
            query: q.clone(),
            method: Method::Condition1,
            estimand: Estimand::prob(free(g, &q.y), free(g, &q.context)),
            steps: vec![Step { rewrite, check }],
            sub: Vec::new(),
        })
    }

    fn condition2(&mut self, q: &Query) -> Result<Derivation, Failure> {
        let g = self.g;
        let xs = NodeSet::from([q.x]);
        let check = rule2_unchecked(g, &q.y, &xs, &NodeSet::new(), &q.context);
        if !check.holds {
            let cut = g.mutilate(&NodeSet::new(), &xs);
            let path = active_path(&cut, &xs, &q.y, &q.context).unwrap_or_default();
            return Err(Failure::BackDoorPath { path });
        }
        let rewrite = format!(
            "{} = {}",
            text(g, &q.y, &[q.x], &q.context, &[]),
            text(g, &q.y, &[], &q.context, &[q.x])
        );
        let mut given = vec![Term::fixed(g.node_name(q.x).clone())];
        given.extend(free(g, &q.context));
        Ok(Derivation {
            query: q.clone(),
            method: Method::Condition2,
            estimand: Estimand::prob(free(g, &q.y), given),
            steps: vec![Step { rewrite, check }],
            sub: Vec::new(),
        })
    }

    fn condition3(&mut self, q: &Query) -> Result<Derivation, Failure> {
        let g = self.g;
        let xs = NodeSet::from([q.x]);
        let b = match BlockingSetFinder::new(g, xs.clone(), q.y.clone())
            .conditioned(q.context.clone())
            .deletion_order(self.options.deletion_order.clone())
            .run_unchecked()
        {
            BlockingSetResult::Found(b) => b,
            BlockingSetResult::Fail(reason) => return Err(Failure::NoBlockingSet { reason }),
        };
        let bc: NodeSet = b.union(&q.context).copied().collect();
        let check = rule2_unchecked(g, &q.y, &xs, &NodeSet::new(), &bc);
        if !check.holds {
            return Err(Failure::Rule { check });
        }
        let mut steps = vec![Step {
            rewrite: format!(
                "{} = {}",
                text(g, &q.y, &[q.x], &bc, &[]),
                text(g, &q.y, &[], &bc, &[q.x])
            ),
            check,
        }];

        let x_name = g.node_name(q.x).clone();
        let mut given = vec![Term::fixed(x_name)];
        given.extend(bound(g, &b));
        given.extend(free(g, &q.context));
        let outcome = Estimand::prob(free(g, &q.y), given);
        let derivation = |estimand, steps, sub| Derivation {
            query: q.clone(),
            method: Method::Condition3,
            estimand,
            steps,
            sub,
        };
        if b.is_empty() {
            return Ok(derivation(outcome, steps, Vec::new()));
        }

        if b.is_disjoint(&self.descendants(q.x)) {
            let check = rule3_unchecked(g, &b, &xs, &NodeSet::new(), &q.context);
            if check.holds {
                steps.push(Step {
                    rewrite: format!(
                        "{} = {}",
                        text(g, &b, &[q.x], &q.context, &[]),
                        text(g, &b, &[], &q.context, &[])
                    ),
                    check,
                });
                let estimand = Estimand::sum(
                    sum_vars(g, &b),
                    Estimand::product([outcome, Estimand::prob(bound(g, &b), free(g, &q.context))]),
                );
                return Ok(derivation(estimand, steps, Vec::new()));
            }
        }

        let sub_query = Query {
            x: q.x,
            y: b.clone(),
            context: q.context.clone(),
        };
        let sub = match self.solve(&sub_query, &[]) {
            Ok(d) => d,
            Err(Unsolved::Cyclic) => return Err(Failure::CyclicSubquery { query: sub_query }),
            Err(Unsolved::Failed(failures)) => {
                return Err(Failure::SubQuery {
                    query: sub_query,
                    failures,
                })
            }
        };
        let mut bindings: Vec<(crate::graph::NodeId, Binding)> = b
            .iter()
            .map(|&v| (g.node_name(v).clone(), Binding::bound(symbol(g, v))))
            .collect();
        bindings.extend(q.context.iter().map(|&v| (g.node_name(v).clone(), Binding::Free)));
        let outer = Estimand::sum(
            sum_vars(g, &b),
            Estimand::product([outcome, Estimand::Hole(Placeholder { id: 0, bindings })]),
        );
        let estimand = substitute(&outer, 0, &sub.estimand).expect("sub-estimand uses only the declared variables");
        Ok(derivation(estimand, steps, vec![sub]))
    }

    fn condition4(&mut self, q: &Query) -> Result<Derivation, Failure> {
        let g = self.g;
        let xs = NodeSet::from([q.x]);
        let ancestors = closure(g, &q.y, Direction::Ancestors, false);
        let z1: NodeSet = g
            .children(q.x)
            .iter()
            .copied()
            .filter(|v| ancestors.contains(v) && !q.y.contains(v))
            .collect();
        if z1.is_empty() {
            return Err(Failure::NoMediators);
        }
        if let Some(&node) = z1.intersection(&q.context).next() {
            return Err(Failure::MediatorConditioned { node });
        }
        if let Some(path) = directed_path(g, q.x, &q.y, &z1) {
            return Err(Failure::UnmediatedPath { path });
        }

        let desc = self.descendants(q.x);
        let order = self.options.deletion_order.clone();
        let outcome_side: NodeSet = desc.iter().filter(|v| !z1.contains(v) && !q.y.contains(v)).copied().collect();
        let x_and_context: NodeSet = q.context.iter().copied().chain([q.x]).collect();
        let to_outcome = BlockingSetFinder::new(g, z1.clone(), q.y.clone())
            .forbidden(outcome_side)
            .conditioned(x_and_context)
            .deletion_order(order.clone());
        let treatment_side: NodeSet = desc.union(&q.y).filter(|v| !z1.contains(v)).copied().collect();
        let from_treatment = BlockingSetFinder::new(g, xs.clone(), z1.clone())
            .forbidden(treatment_side)
            .conditioned(q.context.clone())
            .deletion_order(order);
        let clash = |z2: &NodeSet| {
            z2.contains(&q.x)
                || !z2.is_disjoint(&q.y)
                || !z2.is_disjoint(&z1)
                || !z2.is_disjoint(&q.context)
                || !z2.is_disjoint(&desc)
        };

        // The union of both runs before deletion does not depend on the
        // deletion order; if it works, shrink it while every check holds.
        if let (Ok((_, a)), Ok((_, b))) = (to_outcome.unminimized(), from_treatment.unminimized()) {
            let mut z2: NodeSet = a.union(&b).copied().collect();
            if !clash(&z2) {
                if let Ok(mut best) = self.front_door(q, &z1, &z2) {
                    let order = to_outcome.visit_order();
                    loop {
                        let mut removed = false;
                        for v in &order {
                            if !z2.remove(v) {
                                continue;
                            }
                            match self.front_door(q, &z1, &z2) {
                                Ok(d) => {
                                    best = d;
                                    removed = true;
                                }
                                Err(_) => {
                                    z2.insert(*v);
                                }
                            }
                        }
                        if !removed {
                            break;
                        }
                    }
                    return Ok(best);
                }
            }
        }

        let to_outcome = to_outcome.run_unchecked();
        let from_treatment = from_treatment.run_unchecked();
        let mut candidates: Vec<NodeSet> = Vec::new();
        if let (Some(a), Some(b)) = (to_outcome.found(), from_treatment.found()) {
            candidates.push(a.union(b).copied().collect());
        }
        candidates.extend(to_outcome.found().cloned());
        candidates.extend(from_treatment.found().cloned());
        candidates.push(NodeSet::new());
        let mut unique: Vec<NodeSet> = Vec::new();
        for c in candidates {
            if !unique.contains(&c) {
                unique.push(c);
            }
        }

        let mut first_failure = None;
        for z2 in unique {
            if clash(&z2) {
                continue;
            }
            match self.front_door(q, &z1, &z2) {
                Ok(d) => return Ok(d),
                Err(check) => {
                    first_failure.get_or_insert(Failure::NoCovariateSet {
                        z1: z1.clone(),
                        z2,
                        check,
                    });
                }
            }
        }
        Err(first_failure.expect("the empty covariate set is always a candidate"))
    }

    /// Certifies and assembles the condition 4 estimand for one choice of
    /// covariates, or returns the first rule check that fails.
    fn front_door(&self, q: &Query, z1: &NodeSet, z2: &NodeSet) -> Result<Derivation, RuleCheck> {
        let g = self.g;
        let x = q.x;
        let xs = NodeSet::from([x]);
        let none = NodeSet::new();
        let c = &q.context;
        let z2c: NodeSet = z2.union(c).copied().collect();
        let xz2c: NodeSet = z2c.iter().copied().chain([x]).collect();
        let x_prime = format!("{}'", symbol(g, x));

        let mut steps = Vec::new();
        let mut certify = |check: RuleCheck, rewrite: String| {
            if check.holds {
                steps.push(Step { rewrite, check });
                Ok(())
            } else {
                Err(check)
            }
        };
        let y = labels(g, &q.y);
        let (z1l, z2cl) = (labels(g, z1), labels(g, &z2c));
        let (do_x, do_z1) = (vec![format!("do({})", symbol(g, x))], dos(g, z1));
        certify(
            rule2_unchecked(g, &q.y, z1, &xs, &z2c),
            format!(
                "{} = {}",
                plain(&y, &cat(&[&do_x, &z1l, &z2cl])),
                plain(&y, &cat(&[&do_x, &do_z1, &z2cl]))
            ),
        )?;
        certify(
            rule3_unchecked(g, &q.y, &xs, z1, &z2c),
            format!(
                "{} = {}",
                plain(&y, &cat(&[&do_x, &do_z1, &z2cl])),
                plain(&y, &cat(&[&do_z1, &z2cl]))
            ),
        )?;
        let xp = vec![x_prime.clone()];
        certify(
            rule2_unchecked(g, &q.y, z1, &none, &xz2c),
            format!(
                "{} = {}",
                plain(&y, &cat(&[&do_z1, &xp, &z2cl])),
                plain(&y, &cat(&[&z1l, &xp, &z2cl]))
            ),
        )?;
        certify(
            rule3_unchecked(g, &xs, z1, &none, &z2c),
            format!("{} = {}", plain(&xp, &cat(&[&do_z1, &z2cl])), plain(&xp, &z2cl)),
        )?;
        if !z2.is_empty() {
            let (z2l, cl) = (labels(g, z2), labels(g, c));
            certify(
                rule3_unchecked(g, z2, &xs, &none, c),
                format!("{} = {}", plain(&z2l, &cat(&[&do_x, &cl])), plain(&z2l, &cl)),
            )?;
        }
        certify(
            rule2_unchecked(g, z1, &xs, &none, &z2c),
            format!(
                "{} = {}",
                plain(&z1l, &cat(&[&do_x, &z2cl])),
                plain(&z1l, &cat(&[&[symbol(g, x)], &z2cl]))
            ),
        )?;

        let x_name = g.node_name(x).clone();
        let x_bound = Term::bound(x_name.clone(), x_prime.clone());
        let mut outcome_given = bound(g, z1);
        outcome_given.extend(bound(g, z2));
        outcome_given.push(x_bound.clone());
        outcome_given.extend(free(g, c));
        let mut treatment_given = bound(g, z2);
        treatment_given.extend(free(g, c));
        let mut mediator_given = vec![Term::fixed(x_name.clone())];
        mediator_given.extend(bound(g, z2));
        mediator_given.extend(free(g, c));
        let mut factors = vec![
            Estimand::prob(free(g, &q.y), outcome_given),
            Estimand::prob(vec![x_bound], treatment_given),
            Estimand::prob(bound(g, z1), mediator_given),
        ];
        if !z2.is_empty() {
            factors.push(Estimand::prob(bound(g, z2), free(g, c)));
        }
        let inner = Estimand::sum(
            vec![SumVar {
                symbol: x_prime,
                node: x_name,
            }],
            Estimand::product(factors),
        );
        let mut outer_vars = sum_vars(g, z1);
        outer_vars.extend(sum_vars(g, z2));
        Ok(Derivation {
            query: q.clone(),
            method: Method::Condition4,
            estimand: Estimand::sum(outer_vars, inner),
            steps,
            sub: Vec::new(),
        })
    }

    fn decompose(&mut self, q: &Query) -> Result<Derivation, Failure> {
        if q.y.len() < 2 {
            return Err(Failure::SingleTarget);
        }
        let g = self.g;
        let desc = self.descendants(q.x);
        let topo = topological_order(g);
        let (before, after): (Vec<usize>, Vec<usize>) =
            topo.into_iter().filter(|v| q.y.contains(v)).partition(|v| !desc.contains(v));
        let mut parts: Vec<NodeSet> = Vec::new();
        if !before.is_empty() && !after.is_empty() {
            parts.push(before.into_iter().collect());
        } else {
            parts.extend(before.into_iter().map(|v| NodeSet::from([v])));
        }
        parts.extend(after.into_iter().map(|v| NodeSet::from([v])));

        let mut context = q.context.clone();
        let mut subs = Vec::new();
        for part in parts {
            let sub_query = Query {
                x: q.x,
                y: part.clone(),
                context: context.clone(),
            };
            match self.solve(&sub_query, &[]) {
                Ok(d) => subs.push(d),
                Err(Unsolved::Cyclic) => return Err(Failure::CyclicSubquery { query: sub_query }),
                Err(Unsolved::Failed(failures)) => {
                    return Err(Failure::SubQuery {
                        query: sub_query,
                        failures,
                    })
                }
            }
            context.extend(part);
        }
        Ok(Derivation {
            query: q.clone(),
            method: Method::Decomposed,
            estimand: Estimand::product(subs.iter().map(|d| d.estimand.clone())),
            steps: Vec::new(),
            sub: subs,
        })
    }
}

/// Shortest directed path from `from` to some node of `to` that does not
/// enter `avoid`.
fn directed_path(g: &ExpandedGraph, from: usize, to: &NodeSet, avoid: &NodeSet) -> Option<Vec<usize>> {
    let mut pred: Vec<Option<usize>> = vec![None; g.node_count()];
    let mut seen = vec![false; g.node_count()];
    seen[from] = true;
    let mut queue = std::collections::VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        for &c in g.children(v) {
            if seen[c] || avoid.contains(&c) {
                continue;
            }
            seen[c] = true;
            pred[c] = Some(v);
            if to.contains(&c) {
                let mut path = vec![c];
                let mut at = c;
                while let Some(p) = pred[at] {
                    path.push(p);
                    at = p;
                }
                path.reverse();
                return Some(path);
            }
            queue.push_back(c);
        }
    }
    None
}

/// `X -> Z <-> Y` style rendering; a latent between two observed nodes is
/// shown as a bidirected arc.
pub fn format_path(g: &ExpandedGraph, path: &[usize]) -> String {
    let mut out = String::new();
    for (i, &v) in path.iter().enumerate() {
        if g.is_latent(v) {
            continue;
        }
        if i > 0 {
            let prev = path[i - 1];
            out.push_str(if g.is_latent(prev) {
                " <-> "
            } else if g.has_edge(prev, v) {
                " -> "
            } else {
                " <- "
            });
        }
        out.push_str(g.node_name(v).as_str());
    }
    out
}

fn symbol<G: Dag>(g: &G, v: usize) -> String {
    default_symbol(g.node_name(v))
}

fn labels<G: Dag>(g: &G, set: &NodeSet) -> Vec<String> {
    set.iter().map(|&v| symbol(g, v)).collect()
}

fn dos<G: Dag>(g: &G, set: &NodeSet) -> Vec<String> {
    set.iter().map(|&v| format!("do({})", symbol(g, v))).collect()
}

fn cat(parts: &[&[String]]) -> Vec<String> {
    parts.iter().flat_map(|p| p.iter().cloned()).collect()
}

fn plain(targets: &[String], given: &[String]) -> String {
    if given.is_empty() {
        format!("P({})", targets.join(","))
    } else {
        format!("P({}|{})", targets.join(","), given.join(","))
    }
}

/// `P(y|do(a),...,o,...,x)` for the step descriptions.
fn text<G: Dag>(g: &G, targets: &NodeSet, actions: &[usize], observed: &NodeSet, extra: &[usize]) -> String {
    let given: Vec<String> = actions
        .iter()
        .map(|&v| format!("do({})", symbol(g, v)))
        .chain(extra.iter().map(|&v| symbol(g, v)))
        .chain(observed.iter().map(|&v| symbol(g, v)))
        .collect();
    plain(&labels(g, targets), &given)
}

fn free(g: &ExpandedGraph, set: &NodeSet) -> Vec<Term> {
    set.iter().map(|&v| Term::free(g.node_name(v).clone())).collect()
}

fn bound(g: &ExpandedGraph, set: &NodeSet) -> Vec<Term> {
    set.iter()
        .map(|&v| Term::bound(g.node_name(v).clone(), symbol(g, v)))
        .collect()
}

fn sum_vars(g: &ExpandedGraph, set: &NodeSet) -> Vec<SumVar> {
    set.iter().map(|&v| SumVar::new(g.node_name(v).clone())).collect()
}
