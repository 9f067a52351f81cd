use std::path::PathBuf;

use crate::frontend::SourceSpan;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("illegal character {ch:?} at {span}")]
    Lex { span: SourceSpan, ch: char },

    #[error("unterminated {what} starting at {span}")]
    Unterminated { span: SourceSpan, what: &'static str },

    #[error("parse error at {span}: expected {expected}, found {found:?}")]
    Parse { span: SourceSpan, expected: String, found: String },

    #[error("unsupported construct `{construct}` at {span}")]
    UnsupportedConstruct { span: SourceSpan, construct: String },

    #[error("expected exactly one function definition, found {0}")]
    FunctionCount(usize),

    #[error("no function named `{0}`")]
    FunctionNotFound(String),

    #[error("training data contains only one class")]
    DegenerateData,

    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),

    #[error("feature vector has dimension {found}, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("model has no internal nodes")]
    ZeroSplits,

    #[error("budget {budget} is smaller than the {k} initial points (need budget >= k >= 2)")]
    BudgetTooSmall { budget: usize, k: usize },

    #[error("need at least 2 training samples, got {0}")]
    TooFewSamples(usize),

    #[error("function `{0}` has no statements to compare")]
    EmptyFunction(String),

    #[error("{path}:{line}: {message}")]
    Schema { path: PathBuf, line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context { context: context.into(), source: Box::new(self) }
    }

    /// Innermost error with any context wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

pub trait ResultExt<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|e| e.context(context()))
    }
}
