use thiserror::Error;

/// Errors raised anywhere in the quantile pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("moment does not exist: the t^{order} moment integral of {dist} diverges (largest admissible power {available})")]
    MomentDoesNotExist {
        dist: String,
        order: usize,
        available: usize,
    },

    #[error("quadrature failed to converge: {0}")]
    NonConvergence(String),

    #[error("degenerate density at the anchor: f = {0}")]
    DegenerateDensity(f64),

    #[error("missing value for symbol B_{0}")]
    MissingSymbol(usize),

    #[error("term cap exceeded: P_{n} has {terms} terms (cap {cap})")]
    ResourceLimit { n: usize, terms: usize, cap: usize },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by the filesystem rather than the mathematics.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
