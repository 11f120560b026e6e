//! Applicability tests for the three do-calculus rules.
//!
//! Each test returns a [`RuleCheck`] carrying the surgery and separation
//! query it evaluated, so a derivation can be replayed independently.
//!
//! | rule | identity | graphical condition |
//! |------|----------|---------------------|
//! | 1 | `P(y|x̂,z,w) = P(y|x̂,w)` | `(Y ⟂ Z | X,W)` in `G_X̄` |
//! | 2 | `P(y|x̂,ẑ,w) = P(y|x̂,z,w)` | `(Y ⟂ Z | X,W)` in `G_X̄Z̲` |
//! | 3 | `P(y|x̂,ẑ,w) = P(y|x̂,w)` | `(Y ⟂ Z | X,W)` in `G_X̄,Z(W)̄` |

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::GraphError;
use crate::graph::{Dag, ExpandedGraph, NodeSet, Surgery};
use crate::separation::{check_disjoint, check_observed, separated, SeparationQuery};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Rule {
    /// Insertion/deletion of observations.
    One,
    /// Action/observation exchange.
    Two,
    /// Insertion/deletion of actions.
    Three,
}

impl From<Rule> for u8 {
    fn from(r: Rule) -> u8 {
        match r {
            Rule::One => 1,
            Rule::Two => 2,
            Rule::Three => 3,
        }
    }
}

impl TryFrom<u8> for Rule {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Rule::One),
            2 => Ok(Rule::Two),
            3 => Ok(Rule::Three),
            other => Err(format!("no rule {other}")),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", u8::from(*self))
    }
}

/// The surgery and separation test a rule check evaluated.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub surgery: Surgery,
    pub query: SeparationQuery,
}

impl Certificate {
    /// Re-evaluates the separation test from scratch.
    pub fn evaluate(&self, g: &ExpandedGraph) -> bool {
        let cut = self.surgery.apply(g);
        separated(&cut, &self.query.a, &self.query.b, &self.query.given)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleCheck {
    pub rule: Rule,
    pub x: NodeSet,
    pub y: NodeSet,
    pub z: NodeSet,
    pub w: NodeSet,
    pub holds: bool,
    pub certificate: Certificate,
}

impl RuleCheck {
    /// True when the stored certificate still evaluates to `holds`.
    pub fn replays(&self, g: &ExpandedGraph) -> bool {
        self.certificate.evaluate(g) == self.holds
    }

    /// One-line human readable form, e.g.
    /// `rule 2 holds: ({X4} ⟂ {X3} | {X2}) in G[cut-out {X3}]`.
    pub fn describe<G: Dag>(&self, g: &G) -> String {
        let q = &self.certificate.query;
        format!(
            "rule {} {}: ({} ⟂ {} | {}) in {}",
            self.rule,
            if self.holds { "holds" } else { "fails" },
            g.format_set(&q.a),
            g.format_set(&q.b),
            g.format_set(&q.given),
            self.certificate.surgery.describe(g)
        )
    }
}

fn validate(g: &ExpandedGraph, y: &NodeSet, z: &NodeSet, x: &NodeSet, w: &NodeSet) -> Result<(), GraphError> {
    check_observed(g, [y, z, x, w])?;
    check_disjoint(g, [y, z, x, w])
}

fn check(rule: Rule, g: &ExpandedGraph, y: &NodeSet, z: &NodeSet, x: &NodeSet, w: &NodeSet, surgery: Surgery) -> RuleCheck {
    let given: NodeSet = x.union(w).copied().collect();
    let certificate = Certificate {
        surgery,
        query: SeparationQuery {
            a: y.clone(),
            b: z.clone(),
            given,
        },
    };
    let holds = certificate.evaluate(g);
    RuleCheck {
        rule,
        x: x.clone(),
        y: y.clone(),
        z: z.clone(),
        w: w.clone(),
        holds,
        certificate,
    }
}

/// Rule 1: may the observation `z` be dropped from `P(y | x̂, z, w)`?
pub fn rule1_applicable(g: &ExpandedGraph, y: &NodeSet, z: &NodeSet, x: &NodeSet, w: &NodeSet) -> Result<RuleCheck, GraphError> {
    validate(g, y, z, x, w)?;
    Ok(rule1_unchecked(g, y, z, x, w))
}

/// Rule 2: may the action `ẑ` be exchanged for the observation `z`?
pub fn rule2_applicable(g: &ExpandedGraph, y: &NodeSet, z: &NodeSet, x: &NodeSet, w: &NodeSet) -> Result<RuleCheck, GraphError> {
    validate(g, y, z, x, w)?;
    Ok(rule2_unchecked(g, y, z, x, w))
}

/// Rule 3: may the action `ẑ` be dropped from `P(y | x̂, ẑ, w)`?
pub fn rule3_applicable(g: &ExpandedGraph, y: &NodeSet, z: &NodeSet, x: &NodeSet, w: &NodeSet) -> Result<RuleCheck, GraphError> {
    validate(g, y, z, x, w)?;
    Ok(rule3_unchecked(g, y, z, x, w))
}

pub(crate) fn rule1_unchecked(g: &ExpandedGraph, y: &NodeSet, z: &NodeSet, x: &NodeSet, w: &NodeSet) -> RuleCheck {
    check(Rule::One, g, y, z, x, w, Surgery::incoming(x.clone()))
}

pub(crate) fn rule2_unchecked(g: &ExpandedGraph, y: &NodeSet, z: &NodeSet, x: &NodeSet, w: &NodeSet) -> RuleCheck {
    let surgery = Surgery {
        cut_incoming: x.clone(),
        cut_outgoing: z.clone(),
    };
    check(Rule::Two, g, y, z, x, w, surgery)
}

pub(crate) fn rule3_unchecked(g: &ExpandedGraph, y: &NodeSet, z: &NodeSet, x: &NodeSet, w: &NodeSet) -> RuleCheck {
    let z_w = g
        .z_given_w(x, z, w)
        .expect("rule sets validated as disjoint and observed");
    let cut: NodeSet = x.union(&z_w).copied().collect();
    check(Rule::Three, g, y, z, x, w, Surgery::incoming(cut))
}

pub fn rule_applicable(
    rule: Rule,
    g: &ExpandedGraph,
    y: &NodeSet,
    z: &NodeSet,
    x: &NodeSet,
    w: &NodeSet,
) -> Result<RuleCheck, GraphError> {
    match rule {
        Rule::One => rule1_applicable(g, y, z, x, w),
        Rule::Two => rule2_applicable(g, y, z, x, w),
        Rule::Three => rule3_applicable(g, y, z, x, w),
    }
}
