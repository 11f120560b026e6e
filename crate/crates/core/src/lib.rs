//! Identifiability of single-action causal effects in diagrams with latent
//! confounders.

pub mod docalculus;
pub mod error;
pub mod estimand;
pub mod graph;
pub mod identify;
pub mod oracle;
pub mod parse;
pub mod random;
pub mod separation;

pub use error::{GraphError, ParseError};
pub use graph::{CausalDiagram, Dag, ExpandedGraph, NodeId, NodeSet, Surgery};
pub use parse::{parse_diagram, parse_diagram_with, ParseOptions};
pub use identify::{identify, identify_with, Derivation, IdentifyOptions, Method, Query, Verdict};
pub use separation::{
    active_path, backdoor_blocked, d_separated, find_blocking_set_with_forbidden, find_minimal_blocking_set, BlockingFailure,
    BlockingSetFinder, BlockingSetResult, SeparationQuery,
};
pub use docalculus::{rule1_applicable, rule2_applicable, rule3_applicable, rule_applicable, Certificate, Rule, RuleCheck};
pub use estimand::{evaluate, evaluate_over, parse_estimand, render, Binding, Distribution, Estimand, Style, SumVar, Table, Term};
pub use oracle::{
    check_estimand, interventional, interventional_many, joint_observational, max_estimand_error, random_model, search_counterexample,
    DiscreteModel, ModelSpec, OracleError, SearchConfig, Witness,
};
pub use random::{random_diagram, DiagramShape};
