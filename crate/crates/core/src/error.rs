//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by map construction, iteration and the analysis pipelines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematically admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// A map violates a structural invariant.
    #[error("invalid map: {0}")]
    InvalidMap(String),

    /// Text in the `.map` format could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// An iterate would exceed the configured breakpoint budget.
    #[error("resource limit exceeded at iterate {n}: {detail}")]
    Resource { n: u32, detail: String },

    /// The operation requires structure the given map does not have.
    #[error("unsupported map: {0}")]
    Unsupported(String),

    /// A series configuration fails its own consistency requirements.
    #[error("invalid series configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
