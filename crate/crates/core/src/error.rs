use thiserror::Error;

/// Failures while building or querying a diagram.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("invalid node name {0:?}")]
    InvalidName(String),
    #[error("node names may not start with the reserved prefix `_u_`: {0:?}")]
    ReservedName(String),
    #[error("node {0} declared twice")]
    DuplicateNode(String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("self-loop on {0}")]
    SelfLoop(String),
    #[error("duplicate edge {0}")]
    DuplicateEdge(String),
    #[error("cycle detected through {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("node {0} is latent; only observed nodes may be used here")]
    LatentNode(String),
    #[error("node sets overlap on {0}")]
    Overlap(String),
    #[error("{0} must not be empty")]
    EmptySet(&'static str),
}

/// A diagram source that could not be read, with a 1-based position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}, column {column}: undeclared node {name}")]
    UndeclaredNode {
        line: usize,
        column: usize,
        name: String,
    },
    #[error("line {line}: {source}")]
    Graph {
        line: usize,
        #[source]
        source: GraphError,
    },
    #[error("{0}")]
    Invalid(#[from] GraphError),
}

impl ParseError {
    /// Line the error was reported on, when it has one.
    pub fn line(&self) -> Option<usize> {
        match self {
            ParseError::Syntax { line, .. }
            | ParseError::UndeclaredNode { line, .. }
            | ParseError::Graph { line, .. } => Some(*line),
            ParseError::Invalid(_) => None,
        }
    }
}
