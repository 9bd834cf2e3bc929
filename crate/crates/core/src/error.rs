use std::fmt;

use thiserror::Error;

/// A located problem in an input document. `path` uses JSON-pointer-like
/// dotted notation, e.g. `internal[0].to`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

fn join(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("semantic error: {}", join(.0))]
    Semantic(Vec<Diagnostic>),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("state `{0}` is passive and has no internal transition")]
    NoInternalTransition(String),
    #[error("invalid transition distribution: {0}")]
    InvalidDistribution(String),
    #[error("more than {limit} consecutive transitions without time advancing (zero-delay cycle near state `{state}`)")]
    ZeroDelayCycle { limit: usize, state: String },
    #[error("simulation tree exceeds the node limit of {limit}; use Monte Carlo estimation instead")]
    ExplosionLimit { limit: usize },
    #[error("incompatible endpoints: first path ends in `{end}` with residual {residual}, second starts in `{start}`")]
    IncompatibleEndpoints {
        end: String,
        residual: String,
        start: String,
    },
    #[error("index {index} out of range for a path with {len} elements")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("prefix is not a path prefix in this language")]
    PrefixNotFound,
    #[error("path is not part of this language")]
    PathNotInLanguage,
    #[error("invalid correlation rule: {0}")]
    InvalidRule(String),
    #[error("non-additive criticality spans decision nodes and leaf attribution is disabled")]
    NonAdditiveCriticalityUnsupported,
    #[error("decision node in state `{0}` reached while sampling; use minimax mode")]
    DecisionNodeInSamplingMode(String),
    #[error("edge `{0}` has non-positive capacity")]
    NonpositiveCapacity(String),
    #[error("grid spec error: {}", join(.0))]
    Spec(Vec<Diagnostic>),
    #[error("mode mismatch: expected {expected}, found {found}")]
    ModeMismatch { expected: String, found: String },
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub fn semantic(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Semantic(vec![Diagnostic::new(path, message)])
    }

    /// Diagnostics carried by input-validation errors.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        match self {
            Error::Semantic(d) | Error::Spec(d) => d.clone(),
            other => vec![Diagnostic::new("", other.to_string())],
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
