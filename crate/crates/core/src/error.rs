use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violated an operation's precondition (shape, range, emptiness).
    #[error("rejected input: {0}")]
    RejectedInput(String),

    /// An optimizer step received a NaN or infinite gradient.
    #[error("non-finite gradient in layer {layer}")]
    PoisonedGradient { layer: usize },

    /// Training produced a non-finite loss; carries the step and last metrics.
    #[error("non-finite {what} at step {step}: {detail}")]
    NonFinite {
        what: &'static str,
        step: u64,
        detail: String,
    },

    /// An iterative solver hit its iteration cap.
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// A training run stopped; `bundle` is JSON with the config, step and last metrics.
    #[error("run aborted at step {step} ({category}): {bundle}")]
    Aborted {
        step: u64,
        category: &'static str,
        bundle: String,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn rejected(msg: impl Into<String>) -> Self {
        Error::RejectedInput(msg.into())
    }

    /// Short category name, used for CLI exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::RejectedInput(_) => "input",
            Error::PoisonedGradient { .. } | Error::NonFinite { .. } => "numeric",
            Error::NoConvergence { .. } => "convergence",
            Error::Aborted { category, .. } => category,
            Error::Config(_) => "config",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
