//! Hat-free probability expressions.
//!
//! An [`Estimand`] is a tree of sums, products and conditional probability
//! terms over observed variables. There is no way to write an interventional
//! term, so anything of this type is computable from the observational joint.
//! Each variable occurrence carries a [`Binding`]: a free query variable, the
//! fixed intervention value, or a variable bound by an enclosing sum.

mod eval;
mod render;

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::NodeId;

pub use eval::{evaluate, evaluate_over, Distribution, DistributionError, EvalError, Table};
pub use render::{parse_estimand, render, Style};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Binding {
    /// A variable of the query (target or context).
    Free,
    /// The intervention variable, held at the value supplied at evaluation time.
    Fixed,
    /// Introduced by the enclosing sum with this symbol.
    Bound { symbol: String },
}

impl Binding {
    pub fn bound(symbol: impl Into<String>) -> Self {
        Binding::Bound {
            symbol: symbol.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Term {
    pub node: NodeId,
    pub binding: Binding,
}

impl Term {
    pub fn free(node: NodeId) -> Self {
        Term {
            node,
            binding: Binding::Free,
        }
    }

    pub fn fixed(node: NodeId) -> Self {
        Term {
            node,
            binding: Binding::Fixed,
        }
    }

    pub fn bound(node: NodeId, symbol: impl Into<String>) -> Self {
        Term {
            node,
            binding: Binding::bound(symbol),
        }
    }

    /// Name used when rendering this occurrence.
    pub fn label(&self) -> String {
        match &self.binding {
            Binding::Free | Binding::Fixed => default_symbol(&self.node),
            Binding::Bound { symbol } => symbol.clone(),
        }
    }
}

/// Lower-cased node name: `X2` renders as `x2`.
pub fn default_symbol(node: &NodeId) -> String {
    node.as_str().to_lowercase()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SumVar {
    pub symbol: String,
    pub node: NodeId,
}

impl SumVar {
    pub fn new(node: NodeId) -> Self {
        SumVar {
            symbol: default_symbol(&node),
            node,
        }
    }
}

/// Marks where a sub-derivation will be spliced in. `bindings` maps each
/// free variable the sub-estimand may use to its binding at the hole.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Placeholder {
    pub id: u32,
    pub bindings: Vec<(NodeId, Binding)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Estimand {
    Sum { vars: Vec<SumVar>, body: Box<Estimand> },
    Product { factors: Vec<Estimand> },
    Prob { targets: Vec<Term>, given: Vec<Term> },
    Hole(Placeholder),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EstimandError {
    #[error("placeholder #{0} does not occur")]
    PlaceholderAbsent(u32),
    #[error("placeholder #{0} occurs more than once")]
    PlaceholderDuplicated(u32),
    #[error("sub-estimand uses free variable {0} that the placeholder does not declare")]
    UndeclaredFree(NodeId),
    #[error("placeholder binds {0} to symbol {1:?}, which is not in scope at the hole")]
    Capture(NodeId, String),
    #[error("bound symbol {0:?} is not introduced by an enclosing sum")]
    Unbound(String),
    #[error("symbol {0:?} is introduced by more than one enclosing sum")]
    Shadowed(String),
    #[error("symbol {symbol:?} ranges over {expected} but is used for {found}")]
    NodeMismatch {
        symbol: String,
        expected: NodeId,
        found: NodeId,
    },
    #[error("variable {0} appears twice in one probability term")]
    RepeatedVariable(NodeId),
    #[error("unresolved placeholder #{0}")]
    UnresolvedHole(u32),
    #[error("parse error at byte {at}: {message}")]
    Parse { at: usize, message: String },
}

impl Estimand {
    pub fn prob(targets: Vec<Term>, given: Vec<Term>) -> Self {
        Estimand::Prob { targets, given }
    }

    /// Product that flattens nested products and drops empty ones.
    pub fn product(factors: impl IntoIterator<Item = Estimand>) -> Self {
        let mut flat = Vec::new();
        for f in factors {
            match f {
                Estimand::Product { factors } => flat.extend(factors),
                other => flat.push(other),
            }
        }
        if flat.len() == 1 {
            flat.pop().unwrap()
        } else {
            Estimand::Product { factors: flat }
        }
    }

    /// `Σ_vars body`; an empty variable list yields `body` itself.
    pub fn sum(vars: Vec<SumVar>, body: Estimand) -> Self {
        if vars.is_empty() {
            body
        } else {
            Estimand::Sum {
                vars,
                body: Box::new(body),
            }
        }
    }

    pub fn one() -> Self {
        Estimand::Product { factors: Vec::new() }
    }

    /// Free variables in order of first occurrence.
    pub fn free_nodes(&self) -> Vec<NodeId> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        self.visit_terms(&mut |t| {
            if t.binding == Binding::Free && seen.insert(t.node.clone()) {
                out.push(t.node.clone());
            }
        });
        out
    }

    /// Every node mentioned anywhere in the tree.
    pub fn nodes(&self) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::new();
        self.visit_terms(&mut |t| {
            out.insert(t.node.clone());
        });
        out
    }

    pub fn has_holes(&self) -> bool {
        match self {
            Estimand::Hole(_) => true,
            Estimand::Sum { body, .. } => body.has_holes(),
            Estimand::Product { factors } => factors.iter().any(Estimand::has_holes),
            Estimand::Prob { .. } => false,
        }
    }

    /// Count of probability terms.
    pub fn term_count(&self) -> usize {
        match self {
            Estimand::Sum { body, .. } => body.term_count(),
            Estimand::Product { factors } => factors.iter().map(Estimand::term_count).sum(),
            Estimand::Prob { .. } => 1,
            Estimand::Hole(_) => 0,
        }
    }

    fn visit_terms(&self, f: &mut impl FnMut(&Term)) {
        match self {
            Estimand::Sum { body, .. } => body.visit_terms(f),
            Estimand::Product { factors } => factors.iter().for_each(|e| e.visit_terms(f)),
            Estimand::Prob { targets, given } => targets.iter().chain(given).for_each(f),
            Estimand::Hole(p) => {
                for (node, binding) in &p.bindings {
                    f(&Term {
                        node: node.clone(),
                        binding: binding.clone(),
                    })
                }
            }
        }
    }

    fn labels(&self, out: &mut HashSet<String>) {
        match self {
            Estimand::Sum { vars, body } => {
                out.extend(vars.iter().map(|v| v.symbol.clone()));
                body.labels(out);
            }
            other => other.visit_terms(&mut |t| {
                out.insert(t.label());
            }),
        }
    }

    /// Checks scoping: every bound symbol is introduced by exactly one
    /// enclosing sum over the same node, and no probability term repeats a
    /// variable. Holes are allowed.
    pub fn validate(&self) -> Result<(), EstimandError> {
        fn go(e: &Estimand, scope: &mut Vec<(String, NodeId)>) -> Result<(), EstimandError> {
            let check = |t: &Term, scope: &[(String, NodeId)]| -> Result<(), EstimandError> {
                if let Binding::Bound { symbol } = &t.binding {
                    match scope.iter().rev().find(|(s, _)| s == symbol) {
                        None => return Err(EstimandError::Unbound(symbol.clone())),
                        Some((_, node)) if *node != t.node => {
                            return Err(EstimandError::NodeMismatch {
                                symbol: symbol.clone(),
                                expected: node.clone(),
                                found: t.node.clone(),
                            })
                        }
                        Some(_) => {}
                    }
                }
                Ok(())
            };
            match e {
                Estimand::Sum { vars, body } => {
                    let base = scope.len();
                    for v in vars {
                        if scope.iter().any(|(s, _)| *s == v.symbol) {
                            return Err(EstimandError::Shadowed(v.symbol.clone()));
                        }
                        scope.push((v.symbol.clone(), v.node.clone()));
                    }
                    go(body, scope)?;
                    scope.truncate(base);
                    Ok(())
                }
                Estimand::Product { factors } => factors.iter().try_for_each(|f| go(f, scope)),
                Estimand::Prob { targets, given } => {
                    let mut nodes = HashSet::new();
                    for t in targets.iter().chain(given) {
                        check(t, scope)?;
                        if !nodes.insert(&t.node) {
                            return Err(EstimandError::RepeatedVariable(t.node.clone()));
                        }
                    }
                    Ok(())
                }
                Estimand::Hole(p) => p.bindings.iter().try_for_each(|(node, binding)| {
                    let t = Term {
                        node: node.clone(),
                        binding: binding.clone(),
                    };
                    check(&t, scope).map_err(|err| match err {
                        EstimandError::Unbound(s) => EstimandError::Capture(node.clone(), s),
                        other => other,
                    })
                }),
            }
        }
        go(self, &mut Vec::new())
    }

    /// Like [`Estimand::validate`] but additionally rejects holes.
    pub fn validate_complete(&self) -> Result<(), EstimandError> {
        fn first_hole(e: &Estimand) -> Option<u32> {
            match e {
                Estimand::Hole(p) => Some(p.id),
                Estimand::Sum { body, .. } => first_hole(body),
                Estimand::Product { factors } => factors.iter().find_map(first_hole),
                Estimand::Prob { .. } => None,
            }
        }
        if let Some(id) = first_hole(self) {
            return Err(EstimandError::UnresolvedHole(id));
        }
        self.validate()
    }

    fn count_holes(&self, id: u32) -> usize {
        match self {
            Estimand::Hole(p) => usize::from(p.id == id),
            Estimand::Sum { body, .. } => body.count_holes(id),
            Estimand::Product { factors } => factors.iter().map(|f| f.count_holes(id)).sum(),
            Estimand::Prob { .. } => 0,
        }
    }
}

/// Splices `sub` in place of placeholder `id`.
///
/// Free variables of `sub` take the bindings the placeholder declares for
/// them. Sum symbols of `sub` that collide with any name already used by
/// `e` are renamed by appending primes.
pub fn substitute(e: &Estimand, id: u32, sub: &Estimand) -> Result<Estimand, EstimandError> {
    match e.count_holes(id) {
        0 => return Err(EstimandError::PlaceholderAbsent(id)),
        1 => {}
        _ => return Err(EstimandError::PlaceholderDuplicated(id)),
    }
    e.validate()?;
    sub.validate()?;
    let mut taken = HashSet::new();
    e.labels(&mut taken);
    splice(e, id, sub, &taken)
}

fn splice(e: &Estimand, id: u32, sub: &Estimand, taken: &HashSet<String>) -> Result<Estimand, EstimandError> {
    Ok(match e {
        Estimand::Hole(p) if p.id == id => {
            let map: HashMap<&NodeId, &Binding> = p.bindings.iter().map(|(n, b)| (n, b)).collect();
            for node in sub.free_nodes() {
                if !map.contains_key(&node) {
                    return Err(EstimandError::UndeclaredFree(node));
                }
            }
            let mut sub_labels = HashSet::new();
            sub.labels(&mut sub_labels);
            let names = Names {
                outer: taken,
                inner: &sub_labels,
            };
            rebind(sub, &map, &names, &mut Vec::new())
        }
        Estimand::Sum { vars, body } => Estimand::Sum {
            vars: vars.clone(),
            body: Box::new(splice(body, id, sub, taken)?),
        },
        Estimand::Product { factors } => Estimand::Product {
            factors: factors
                .iter()
                .map(|f| splice(f, id, sub, taken))
                .collect::<Result<_, _>>()?,
        },
        other => other.clone(),
    })
}

struct Names<'a> {
    outer: &'a HashSet<String>,
    inner: &'a HashSet<String>,
}

/// Copies `e`, renaming colliding sum symbols and replacing free bindings.
fn rebind(
    e: &Estimand,
    free: &HashMap<&NodeId, &Binding>,
    names: &Names<'_>,
    renames: &mut Vec<(String, String)>,
) -> Estimand {
    let map_term = |t: &Term, renames: &[(String, String)]| -> Term {
        let binding = match &t.binding {
            Binding::Free => free[&t.node].clone(),
            Binding::Fixed => Binding::Fixed,
            Binding::Bound { symbol } => {
                let renamed = renames
                    .iter()
                    .rev()
                    .find(|(from, _)| from == symbol)
                    .map(|(_, to)| to.clone())
                    .unwrap_or_else(|| symbol.clone());
                Binding::Bound { symbol: renamed }
            }
        };
        Term {
            node: t.node.clone(),
            binding,
        }
    };
    match e {
        Estimand::Sum { vars, body } => {
            let base = renames.len();
            let mut new_vars = Vec::with_capacity(vars.len());
            for v in vars {
                let in_chain = |s: &String| renames.iter().any(|(_, to)| to == s);
                let mut symbol = v.symbol.clone();
                if names.outer.contains(&symbol) || in_chain(&symbol) {
                    while names.outer.contains(&symbol) || names.inner.contains(&symbol) || in_chain(&symbol) {
                        symbol.push('\'');
                    }
                }
                renames.push((v.symbol.clone(), symbol.clone()));
                new_vars.push(SumVar {
                    symbol,
                    node: v.node.clone(),
                });
            }
            let body = rebind(body, free, names, renames);
            renames.truncate(base);
            Estimand::Sum {
                vars: new_vars,
                body: Box::new(body),
            }
        }
        Estimand::Product { factors } => Estimand::Product {
            factors: factors.iter().map(|f| rebind(f, free, names, renames)).collect(),
        },
        Estimand::Prob { targets, given } => Estimand::Prob {
            targets: targets.iter().map(|t| map_term(t, renames)).collect(),
            given: given.iter().map(|t| map_term(t, renames)).collect(),
        },
        Estimand::Hole(p) => Estimand::Hole(Placeholder {
            id: p.id,
            bindings: p
                .bindings
                .iter()
                .map(|(n, b)| {
                    let t = map_term(
                        &Term {
                            node: n.clone(),
                            binding: b.clone(),
                        },
                        renames,
                    );
                    (t.node, t.binding)
                })
                .collect(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> NodeId {
        NodeId::new(s).unwrap()
    }

    fn marker(id: u32, bindings: Vec<(NodeId, Binding)>) -> Estimand {
        Estimand::Hole(Placeholder { id, bindings })
    }

    #[test]
    fn product_flattens() {
        let p = Estimand::product([
            Estimand::prob(vec![Term::free(n("A"))], vec![]),
            Estimand::product([Estimand::prob(vec![Term::free(n("B"))], vec![])]),
        ]);
        assert_eq!(p.term_count(), 2);
        assert!(matches!(p, Estimand::Product { ref factors } if factors.len() == 2));
        assert_eq!(Estimand::sum(vec![], Estimand::one()), Estimand::one());
    }

    #[test]
    fn splice_marginal_into_adjustment() {
        let b = n("B");
        let outer = Estimand::sum(
            vec![SumVar::new(b.clone())],
            Estimand::product([
                Estimand::prob(
                    vec![Term::free(n("Y"))],
                    vec![Term::fixed(n("X")), Term::bound(b.clone(), "b")],
                ),
                marker(0, vec![(b.clone(), Binding::bound("b"))]),
            ]),
        );
        let sub = Estimand::prob(vec![Term::free(b.clone())], vec![]);
        let spliced = substitute(&outer, 0, &sub).unwrap();
        assert_eq!(render(&spliced, Style::Plain), "Σ_{b} P(y|x,b) P(b)");
        spliced.validate_complete().unwrap();
    }

    #[test]
    fn splice_renames_shadowing_symbols() {
        let b = n("B");
        let outer = Estimand::sum(
            vec![SumVar::new(b.clone())],
            Estimand::product([
                Estimand::prob(vec![Term::free(n("Y"))], vec![Term::bound(b.clone(), "b")]),
                marker(3, vec![(n("C"), Binding::Free)]),
            ]),
        );
        // the sub-estimand sums over its own `b`
        let sub = Estimand::sum(
            vec![SumVar::new(b.clone())],
            Estimand::product([
                Estimand::prob(vec![Term::free(n("C"))], vec![Term::bound(b.clone(), "b")]),
                Estimand::prob(vec![Term::bound(b.clone(), "b")], vec![]),
            ]),
        );
        let spliced = substitute(&outer, 3, &sub).unwrap();
        assert_eq!(render(&spliced, Style::Plain), "Σ_{b} P(y|b) (Σ_{b'} P(c|b') P(b'))");
        spliced.validate_complete().unwrap();
    }

    #[test]
    fn splice_errors() {
        let sub = Estimand::prob(vec![Term::free(n("B"))], vec![]);
        let none = Estimand::prob(vec![Term::free(n("Y"))], vec![]);
        assert_eq!(substitute(&none, 0, &sub), Err(EstimandError::PlaceholderAbsent(0)));
        let twice = Estimand::product([marker(0, vec![]), marker(0, vec![])]);
        assert_eq!(substitute(&twice, 0, &sub), Err(EstimandError::PlaceholderDuplicated(0)));
        let undeclared = marker(0, vec![]);
        assert_eq!(substitute(&undeclared, 0, &sub), Err(EstimandError::UndeclaredFree(n("B"))));
        let escaping = marker(0, vec![(n("B"), Binding::bound("b"))]);
        assert!(matches!(substitute(&escaping, 0, &sub), Err(EstimandError::Capture(..))));
    }

    #[test]
    fn validation_catches_scoping_errors() {
        let unbound = Estimand::prob(vec![Term::bound(n("A"), "a")], vec![]);
        assert_eq!(unbound.validate(), Err(EstimandError::Unbound("a".into())));
        let shadow = Estimand::sum(
            vec![SumVar::new(n("A"))],
            Estimand::sum(vec![SumVar::new(n("A"))], Estimand::prob(vec![Term::bound(n("A"), "a")], vec![])),
        );
        assert_eq!(shadow.validate(), Err(EstimandError::Shadowed("a".into())));
        let repeated = Estimand::prob(vec![Term::free(n("A"))], vec![Term::free(n("A"))]);
        assert!(matches!(repeated.validate(), Err(EstimandError::RepeatedVariable(_))));
        let mismatch = Estimand::sum(vec![SumVar::new(n("A"))], Estimand::prob(vec![Term::bound(n("B"), "a")], vec![]));
        assert!(matches!(mismatch.validate(), Err(EstimandError::NodeMismatch { .. })));
    }
}
