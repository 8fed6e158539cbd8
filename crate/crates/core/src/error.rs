use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },

    #[error("unsupported feature: {0}")]
    Feature(String),

    #[error("shape violation: {0}")]
    ShapeViolation(String),

    #[error("the universal role is required to connect {0} component(s)")]
    UniversalRoleRequired(usize),

    #[error("polarity error: {0}")]
    Polarity(String),

    #[error("unknown symbol: {0}")]
    UnknownSymbol(String),

    #[error("dialect error: {0}")]
    Dialect(String),

    #[error("arity error: {0}")]
    Arity(String),

    #[error("resource limit: {0}")]
    ResourceLimit(ResourceLimit),

    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Why a computation gave up, plus whatever partial evidence it had gathered.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct ResourceLimit {
    pub what: String,
    pub limit: u64,
    /// Depth reached by the last completed attempt, if the search was depth-bounded.
    pub depth: Option<usize>,
}

impl std::fmt::Display for ResourceLimit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} exceeded {}", self.what, self.limit)?;
        if let Some(d) = self.depth {
            write!(f, " (depth reached {d})")?;
        }
        Ok(())
    }
}

impl Error {
    pub fn resource(what: impl Into<String>, limit: u64, depth: Option<usize>) -> Self {
        Error::ResourceLimit(ResourceLimit { what: what.into(), limit, depth })
    }

    pub fn is_resource_limit(&self) -> bool {
        matches!(self, Error::ResourceLimit(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
