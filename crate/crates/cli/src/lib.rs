//! Command-line front end: argument definitions and the command runners.
//! `main` only parses, calls [`run`] and maps the result to an exit code.

pub mod report;

use std::fmt::Write as _;
use std::io::IsTerminal;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use causal_ident::oracle::SearchConfig;
use causal_ident::{
    active_path, d_separated, identify, max_estimand_error, parse_diagram, random_model, render, rule_applicable, search_counterexample,
    Dag, ExpandedGraph, ModelSpec, NodeSet, Query, Rule, SeparationQuery, Style, Verdict,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use report::{DsepReport, IdentifyReport, Outcome, QueryReport, RuleCheckReport, VerifyReport, WitnessReport};

#[derive(Parser, Debug)]
#[command(name = "causal-ident", version, about = "Decide whether P(y|do(x)) is identifiable from a causal diagram")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Verdict, condition used, estimand and rule-certificate trace.
    Identify(QueryArgs),
    /// The estimand formula only.
    Estimand(QueryArgs),
    /// Test (A ⟂ B | Z) in the diagram.
    Dsep(DsepArgs),
    /// Test one do-calculus rule on P(y|do(x),z,w).
    Rulecheck(RuleArgs),
    /// Check the estimand on random models, or look for a counterexample.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Plain,
    Latex,
    Json,
}

#[derive(Args, Debug)]
pub struct GraphArgs {
    /// Diagram file (`node A B`, `A -> B`, `A <-> B`, `#` comments).
    #[arg(short = 'g', long = "graph", value_name = "PATH")]
    pub graph: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Plain)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct QueryArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Intervention node.
    #[arg(short = 'x', value_name = "NODE")]
    pub x: String,
    /// Target nodes.
    #[arg(short = 'y', value_name = "NODE,...", value_delimiter = ',', required = true)]
    pub y: Vec<String>,
    /// Observed conditioning nodes.
    #[arg(short = 'c', long = "context", value_name = "NODE,...", value_delimiter = ',')]
    pub context: Vec<String>,
}

#[derive(Args, Debug)]
pub struct DsepArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(short = 'a', value_name = "NODE,...", value_delimiter = ',', required = true)]
    pub a: Vec<String>,
    #[arg(short = 'b', value_name = "NODE,...", value_delimiter = ',', required = true)]
    pub b: Vec<String>,
    /// Conditioning set.
    #[arg(short = 'z', value_name = "NODE,...", value_delimiter = ',')]
    pub z: Vec<String>,
}

#[derive(Args, Debug)]
pub struct RuleArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub rule: u8,
    /// `Y;Z;X;W` for P(y|do(x),z,w), each a comma list, X and W may be empty.
    #[arg(long, value_name = "Y;Z;X;W")]
    pub sets: String,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub query: QueryArgs,
    /// Random models to check an estimand on.
    #[arg(long, default_value_t = 100)]
    pub models: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Trials for the counterexample search when the criterion fails.
    #[arg(long, default_value_t = 10_000)]
    pub budget: usize,
    /// Write the two models of a counterexample into this directory.
    #[arg(long, value_name = "DIR")]
    pub dump_witness: Option<PathBuf>,
}

/// What the process should report back.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// The criterion did not identify the effect.
    NotIdentifiable,
    /// `verify` found an estimand error above tolerance.
    Failed,
}

pub struct Output {
    pub text: String,
    pub status: Status,
}

/// Styling is on for terminals unless `IDENT_COLOR=0`.
pub fn color_enabled() -> bool {
    std::env::var("IDENT_COLOR").map_or(true, |v| v != "0") && std::io::stdout().is_terminal()
}

fn paint(text: &str, code: &str, color: bool) -> String {
    if color {
        format!("\x1b[{code}m{text}\x1b[0m")
    } else {
        text.to_string()
    }
}

pub fn run(cli: &Cli, color: bool) -> Result<Output> {
    match &cli.command {
        Command::Identify(args) => run_identify(args, color),
        Command::Estimand(args) => run_estimand(args),
        Command::Dsep(args) => run_dsep(args, color),
        Command::Rulecheck(args) => run_rulecheck(args, color),
        Command::Verify(args) => run_verify(args, color),
    }
}

pub fn load_graph(path: &Path) -> Result<ExpandedGraph> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let diagram = parse_diagram(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    Ok(diagram.expand_latents())
}

fn resolve(g: &ExpandedGraph, names: &[String], flag: &str) -> Result<NodeSet> {
    let names: Vec<&str> = names.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
    g.resolve(&names).map_err(|e| anyhow!("{flag}: {e}"))
}

fn query(g: &ExpandedGraph, args: &QueryArgs) -> Result<Query> {
    let x = g
        .index_of(args.x.trim())
        .ok_or_else(|| anyhow!("-x: unknown node {}", args.x.trim()))?;
    let y = resolve(g, &args.y, "-y")?;
    let context = resolve(g, &args.context, "--context")?;
    Query::new(g, x, y, context).map_err(|e| anyhow!("invalid query: {e}"))
}

fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn style_of(format: Format) -> Style {
    match format {
        Format::Latex => Style::Latex,
        _ => Style::Plain,
    }
}

fn verdict_status(v: &Verdict) -> Status {
    if v.is_identifiable() {
        Status::Ok
    } else {
        Status::NotIdentifiable
    }
}

fn run_identify(args: &QueryArgs, color: bool) -> Result<Output> {
    let g = load_graph(&args.graph.graph)?;
    let q = query(&g, args)?;
    let v = identify(&g, &q);
    let status = verdict_status(&v);
    let report = IdentifyReport::new(&g, &q, &v);
    if args.graph.format == Format::Json {
        return Ok(Output { text: json(&report), status });
    }
    let mut out = String::new();
    match &v {
        Verdict::Identifiable(d) => {
            let _ = writeln!(out, "{} ({})", paint("identifiable", "1;32", color), d.method);
            let _ = writeln!(out, "query: {}", report.query.text);
            let _ = writeln!(out, "estimand: {}", render(&d.estimand, style_of(args.graph.format)));
            let _ = writeln!(out, "trace:");
            for (i, step) in report.trace.iter().enumerate() {
                let _ = writeln!(out, "  {}. {}", i + 1, step.rewrite);
                let _ = writeln!(out, "     {}", step.check.text);
            }
        }
        Verdict::NotIdentifiableByCriterion { failures } => {
            let _ = writeln!(out, "{}", paint("not identifiable by criterion", "1;31", color));
            let _ = writeln!(out, "query: {}", report.query.text);
            let _ = writeln!(out, "failures:");
            for f in failures {
                let _ = writeln!(out, "  {}", f.describe(&g));
            }
        }
    }
    Ok(Output { text: out, status })
}

fn run_estimand(args: &QueryArgs) -> Result<Output> {
    let g = load_graph(&args.graph.graph)?;
    let q = query(&g, args)?;
    let v = identify(&g, &q);
    let status = verdict_status(&v);
    if args.graph.format == Format::Json {
        let report = IdentifyReport::new(&g, &q, &v);
        return Ok(Output { text: json(&report.estimand), status });
    }
    let text = match v.estimand() {
        Some(e) => format!("{}\n", render(e, style_of(args.graph.format))),
        None => String::new(),
    };
    Ok(Output { text, status })
}

fn run_dsep(args: &DsepArgs, color: bool) -> Result<Output> {
    let g = load_graph(&args.graph.graph)?;
    let a = resolve(&g, &args.a, "-a")?;
    let b = resolve(&g, &args.b, "-b")?;
    let z = resolve(&g, &args.z, "-z")?;
    let sq = SeparationQuery::new(&g, a.clone(), b.clone(), z.clone()).map_err(|e| anyhow!("invalid separation query: {e}"))?;
    let separated = d_separated(&g, &sq);
    let path = if separated { None } else { active_path(&g, &a, &b, &z) };
    let report = DsepReport::new(&g, &a, &b, &z, separated, path.as_deref());
    let text = match args.graph.format {
        Format::Json => json(&report),
        _ if separated => format!("{}\n", paint("separated", "1;32", color)),
        _ => format!(
            "{} via {}\n",
            paint("connected", "1;31", color),
            report.path.as_deref().unwrap_or("?")
        ),
    };
    Ok(Output { text, status: Status::Ok })
}

fn run_rulecheck(args: &RuleArgs, color: bool) -> Result<Output> {
    let g = load_graph(&args.graph.graph)?;
    let parts: Vec<&str> = args.sets.split(';').collect();
    if parts.len() != 4 {
        bail!("--sets: expected four `;`-separated groups Y;Z;X;W, got {}", parts.len());
    }
    let group = |i: usize, label: &str| -> Result<NodeSet> {
        let names: Vec<String> = parts[i].split(',').map(str::to_string).collect();
        resolve(&g, &names, &format!("--sets {label}"))
    };
    let (y, z, x, w) = (group(0, "Y")?, group(1, "Z")?, group(2, "X")?, group(3, "W")?);
    if y.is_empty() || z.is_empty() {
        bail!("--sets: Y and Z must not be empty");
    }
    let rule = Rule::try_from(args.rule).map_err(|e| anyhow!(e))?;
    let check = rule_applicable(rule, &g, &y, &z, &x, &w).map_err(|e| anyhow!("invalid rule sets: {e}"))?;
    let report = RuleCheckReport::new(&g, &check);
    let text = match args.graph.format {
        Format::Json => json(&report),
        _ => {
            let (word, code) = if check.holds { ("holds", "1;32") } else { ("fails", "1;31") };
            format!("{}\n{}\n", paint(word, code, color), report.text)
        }
    };
    Ok(Output { text, status: Status::Ok })
}

fn run_verify(args: &VerifyArgs, color: bool) -> Result<Output> {
    let qa = &args.query;
    let g = load_graph(&qa.graph.graph)?;
    let q = query(&g, qa)?;
    if !(args.tol > 0.0) {
        bail!("--tol must be positive");
    }
    let v = identify(&g, &q);
    let mut report = VerifyReport {
        query: QueryReport::new(&g, &q),
        outcome: if v.is_identifiable() { Outcome::Identifiable } else { Outcome::NotIdentifiableByCriterion },
        estimand: v.estimand().map(|e| render(e, Style::Plain)),
        models: args.models,
        seed: args.seed,
        tolerance: args.tol,
        max_error: None,
        witness: None,
        passed: false,
    };
    let status = match v.estimand() {
        Some(e) => {
            let spec = ModelSpec::default();
            let errors: Vec<f64> = (0..args.models as u64)
                .into_par_iter()
                .map(|i| {
                    let m = random_model(&g, args.seed.wrapping_add(i), &spec)?;
                    Ok(max_estimand_error(&m, e, &q)?)
                })
                .collect::<Result<_>>()?;
            let worst = errors.into_iter().fold(0.0, f64::max);
            report.max_error = Some(worst);
            report.passed = worst < args.tol;
            if report.passed {
                Status::Ok
            } else {
                Status::Failed
            }
        }
        None => {
            let cfg = SearchConfig {
                budget: args.budget,
                seed: args.seed,
                ..SearchConfig::default()
            };
            if let Some(w) = search_counterexample(&g, &q, &cfg)? {
                if let Some(dir) = &args.dump_witness {
                    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
                    for (name, m) in [("model_a.txt", &w.model_a), ("model_b.txt", &w.model_b)] {
                        let path = dir.join(name);
                        std::fs::write(&path, m.to_text()).with_context(|| format!("cannot write {}", path.display()))?;
                    }
                }
                report.witness = Some(WitnessReport {
                    trial: w.trial,
                    obs_distance: w.obs_distance,
                    effect_distance: w.effect_distance,
                });
            }
            Status::NotIdentifiable
        }
    };
    if qa.graph.format == Format::Json {
        return Ok(Output { text: json(&report), status });
    }
    let mut out = String::new();
    let _ = writeln!(out, "query: {}", report.query.text);
    match (&report.estimand, report.max_error) {
        (Some(e), Some(worst)) => {
            let _ = writeln!(out, "estimand: {e}");
            let _ = writeln!(out, "models: {} (seeds {}..{})", args.models, args.seed, args.seed.wrapping_add(args.models as u64));
            let _ = writeln!(out, "max error: {worst:.3e} (tolerance {:e})", args.tol);
            let verdict = if report.passed { paint("passed", "1;32", color) } else { paint("FAILED", "1;31", color) };
            let _ = writeln!(out, "{verdict}");
        }
        _ => {
            let _ = writeln!(out, "{}", paint("not identifiable by criterion", "1;31", color));
            match &report.witness {
                Some(w) => {
                    let _ = writeln!(
                        out,
                        "counterexample at trial {}: observational distance {:.3e}, effect distance {:.4}",
                        w.trial, w.obs_distance, w.effect_distance
                    );
                    if let Some(dir) = &args.dump_witness {
                        let _ = writeln!(out, "models written to {}", dir.display());
                    }
                }
                None => {
                    let _ = writeln!(out, "no counterexample in {} trials", args.budget);
                }
            }
        }
    }
    Ok(Output { text: out, status })
}
