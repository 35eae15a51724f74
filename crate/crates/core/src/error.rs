use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("time range error: t = {t} < s = {s}")]
    Range { t: usize, s: usize },

    /// A weight matrix or graph broke a protocol precondition (missing self-loop,
    /// non-stochastic column).
    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("capability error: {0}")]
    Capability(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("trial {trial} (seed {seed}) failed: {source}")]
    Trial {
        trial: u64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}
