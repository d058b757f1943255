use thiserror::Error;

use crate::plan::{ContactId, Diagnostic, NodeId};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid contact plan: {}", join_diagnostics(.0))]
    InvalidPlan(Vec<Diagnostic>),

    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("unknown contact {0}")]
    UnknownContact(ContactId),

    #[error("broken route: {0}")]
    BrokenRoute(String),

    #[error("insufficient residual capacity on contact {contact}: {residual} left, {requested} requested")]
    InsufficientCapacity {
        contact: ContactId,
        residual: u64,
        requested: u64,
    },

    #[error("invalid demand: {0}")]
    InvalidDemand(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("LP shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("LP solution is not optimal ({0})")]
    NotOptimal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn join_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
