//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor/matrix dimensions do not line up.
    #[error("shape error: {0}")]
    Shape(String),

    /// Non-finite values or other numeric breakdown.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// An operation was called out of order (e.g. gradients read before
    /// backward ran).
    #[error("state error: {0}")]
    State(String),

    /// An input is outside the operation's domain (negative mass, label out
    /// of range, overlapping groups, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A confusion matrix of the wrong kind was supplied.
    #[error("kind error: {0}")]
    Kind(String),

    /// Invalid configuration value.
    #[error("config error: {0}")]
    Config(String),

    /// An iterative solver did not reach its tolerance.
    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: String, iterations: usize },

    /// CSV/file ingestion failure with the offending line numbers.
    #[error("ingestion error: {message}{}", format_lines(.lines))]
    Ingest { message: String, lines: Vec<usize> },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

fn format_lines(lines: &[usize]) -> String {
    if lines.is_empty() {
        String::new()
    } else {
        let shown: Vec<String> = lines.iter().take(20).map(|l| l.to_string()).collect();
        let suffix = if lines.len() > 20 { ", ..." } else { "" };
        format!(" (lines {}{})", shown.join(", "), suffix)
    }
}

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
    pub fn state(msg: impl Into<String>) -> Self {
        Error::State(msg.into())
    }
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn kind(msg: impl Into<String>) -> Self {
        Error::Kind(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
