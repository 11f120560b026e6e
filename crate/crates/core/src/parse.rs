//! Line-oriented diagram source.
//!
//! ```text
//! # latent sprinkler
//! node X2 X3 X4 X5
//! X2 <-> X3
//! X2 -> X4
//! X3 -> X4
//! X4 -> X5
//! ```

use crate::error::{GraphError, ParseError};
use crate::graph::{is_identifier, CausalDiagram, DiagramBuilder};

#[derive(Clone, Copy, Debug)]
pub struct ParseOptions {
    /// Reject edges that name nodes without a prior `node` declaration.
    pub strict: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { strict: true }
    }
}

pub fn parse_diagram(text: &str) -> Result<CausalDiagram, ParseError> {
    parse_diagram_with(text, ParseOptions::default())
}

pub fn parse_diagram_with(text: &str, options: ParseOptions) -> Result<CausalDiagram, ParseError> {
    let mut builder = CausalDiagram::builder();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        if line.trim().is_empty() {
            continue;
        }
        if let Some((arrow_at, bidirected)) = find_arrow(line) {
            let arrow_len = if bidirected { 3 } else { 2 };
            let left = &line[..arrow_at];
            let right = &line[arrow_at + arrow_len..];
            let a = endpoint(&mut builder, left, 0, line_no, options)?;
            let b = endpoint(&mut builder, right, arrow_at + arrow_len, line_no, options)?;
            let added = if bidirected {
                builder.bidirected(a, b)
            } else {
                builder.edge(a, b)
            };
            added.map_err(|source| ParseError::Graph {
                line: line_no,
                source,
            })?;
            continue;
        }
        let trimmed_start = line.len() - line.trim_start().len();
        let mut words = tokens(line);
        match words.next() {
            Some((_, "node")) => {
                for (col, name) in words {
                    check_identifier(name, line_no, col)?;
                    builder.node(name).map_err(|source| ParseError::Graph {
                        line: line_no,
                        source,
                    })?;
                }
            }
            _ => {
                return Err(ParseError::Syntax {
                    line: line_no,
                    column: trimmed_start + 1,
                    message: "expected `node ...`, `A -> B` or `A <-> B`".to_string(),
                })
            }
        }
    }
    Ok(builder.build()?)
}

/// Byte offset of the first arrow and whether it is bidirected.
fn find_arrow(line: &str) -> Option<(usize, bool)> {
    let bi = line.find("<->");
    let di = line.find("->");
    match (bi, di) {
        (Some(b), Some(d)) if b < d => Some((b, true)),
        (_, Some(d)) => Some((d, false)),
        (Some(b), None) => Some((b, true)),
        (None, None) => None,
    }
}

/// Whitespace-separated words with their 1-based columns.
fn tokens(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s + 1, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out.into_iter()
}

fn check_identifier(name: &str, line: usize, column: usize) -> Result<(), ParseError> {
    if is_identifier(name) {
        Ok(())
    } else {
        Err(ParseError::Syntax {
            line,
            column,
            message: format!("invalid node name {name:?}"),
        })
    }
}

fn endpoint(
    builder: &mut DiagramBuilder,
    segment: &str,
    offset: usize,
    line: usize,
    options: ParseOptions,
) -> Result<usize, ParseError> {
    let words: Vec<(usize, &str)> = tokens(segment).collect();
    let (col, name) = match words.as_slice() {
        [single] => *single,
        [] => {
            return Err(ParseError::Syntax {
                line,
                column: offset + 1,
                message: "missing node name around arrow".to_string(),
            })
        }
        [_, (col, extra), ..] => {
            return Err(ParseError::Syntax {
                line,
                column: offset + col,
                message: format!("unexpected token {extra:?}"),
            })
        }
    };
    let column = offset + col;
    check_identifier(name, line, column)?;
    match builder.index_of(name) {
        Some(i) => Ok(i),
        None if options.strict => Err(ParseError::UndeclaredNode {
            line,
            column,
            name: name.to_string(),
        }),
        None => builder.ensure_node(name).map_err(|source: GraphError| ParseError::Graph { line, source }),
    }
}
