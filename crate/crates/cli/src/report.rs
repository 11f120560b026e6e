//! Machine-readable reports. Every node is referred to by name so a report
//! can be checked against the graph file without this crate.

use causal_ident::identify::{format_path, ConditionFailure};
use causal_ident::{render, Dag, ExpandedGraph, Method, NodeSet, Query, RuleCheck, Style, Verdict};
use serde::{Deserialize, Serialize};

fn names(g: &ExpandedGraph, set: &NodeSet) -> Vec<String> {
    set.iter().map(|&v| g.node_name(v).to_string()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryReport {
    pub x: String,
    pub y: Vec<String>,
    pub context: Vec<String>,
    pub text: String,
}

impl QueryReport {
    pub fn new(g: &ExpandedGraph, q: &Query) -> Self {
        QueryReport {
            x: g.node_name(q.x).to_string(),
            y: names(g, &q.y),
            context: names(g, &q.context),
            text: q.describe(g),
        }
    }
}

/// `a ⟂ b | given` in the graph after cutting the listed arrows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub cut_incoming: Vec<String>,
    pub cut_outgoing: Vec<String>,
    pub a: Vec<String>,
    pub b: Vec<String>,
    pub given: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleCheckReport {
    pub rule: u8,
    pub holds: bool,
    pub y: Vec<String>,
    pub z: Vec<String>,
    pub x: Vec<String>,
    pub w: Vec<String>,
    pub certificate: CertificateReport,
    pub text: String,
}

impl RuleCheckReport {
    pub fn new(g: &ExpandedGraph, c: &RuleCheck) -> Self {
        let cert = &c.certificate;
        RuleCheckReport {
            rule: c.rule.into(),
            holds: c.holds,
            y: names(g, &c.y),
            z: names(g, &c.z),
            x: names(g, &c.x),
            w: names(g, &c.w),
            certificate: CertificateReport {
                cut_incoming: names(g, &cert.surgery.cut_incoming),
                cut_outgoing: names(g, &cert.surgery.cut_outgoing),
                a: names(g, &cert.query.a),
                b: names(g, &cert.query.b),
                given: names(g, &cert.query.given),
            },
            text: c.describe(g),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub rewrite: String,
    pub check: RuleCheckReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimandReport {
    pub plain: String,
    pub latex: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureReport {
    pub method: Method,
    pub reason: String,
}

impl FailureReport {
    fn new(g: &ExpandedGraph, f: &ConditionFailure) -> Self {
        let full = f.describe(g);
        let prefix = format!("{}: ", f.method);
        FailureReport {
            method: f.method,
            reason: full.strip_prefix(&prefix).unwrap_or(&full).to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Identifiable,
    NotIdentifiableByCriterion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentifyReport {
    pub query: QueryReport,
    pub outcome: Outcome,
    pub method: Option<Method>,
    pub estimand: Option<EstimandReport>,
    /// Every certified rewrite, outer derivation first.
    pub trace: Vec<StepReport>,
    pub failures: Vec<FailureReport>,
}

impl IdentifyReport {
    pub fn new(g: &ExpandedGraph, q: &Query, v: &Verdict) -> Self {
        let query = QueryReport::new(g, q);
        match v {
            Verdict::Identifiable(d) => IdentifyReport {
                query,
                outcome: Outcome::Identifiable,
                method: Some(d.method),
                estimand: Some(EstimandReport {
                    plain: render(&d.estimand, Style::Plain),
                    latex: render(&d.estimand, Style::Latex),
                }),
                trace: d
                    .trace()
                    .into_iter()
                    .map(|s| StepReport {
                        rewrite: s.rewrite.clone(),
                        check: RuleCheckReport::new(g, &s.check),
                    })
                    .collect(),
                failures: Vec::new(),
            },
            Verdict::NotIdentifiableByCriterion { failures } => IdentifyReport {
                query,
                outcome: Outcome::NotIdentifiableByCriterion,
                method: None,
                estimand: None,
                trace: Vec::new(),
                failures: failures.iter().map(|f| FailureReport::new(g, f)).collect(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DsepReport {
    pub a: Vec<String>,
    pub b: Vec<String>,
    pub given: Vec<String>,
    pub separated: bool,
    /// An active path when not separated; latent hops are written `<->`.
    pub path: Option<String>,
}

impl DsepReport {
    pub fn new(g: &ExpandedGraph, a: &NodeSet, b: &NodeSet, given: &NodeSet, separated: bool, path: Option<&[usize]>) -> Self {
        DsepReport {
            a: names(g, a),
            b: names(g, b),
            given: names(g, given),
            separated,
            path: path.map(|p| format_path(g, p)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub trial: usize,
    pub obs_distance: f64,
    pub effect_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub query: QueryReport,
    pub outcome: Outcome,
    pub estimand: Option<String>,
    pub models: usize,
    pub seed: u64,
    pub tolerance: f64,
    /// Largest estimand error over all models and intervention values.
    pub max_error: Option<f64>,
    pub witness: Option<WitnessReport>,
    pub passed: bool,
}
