use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("attribution format error: {0}")]
    Format(String),

    #[error("lexicon error: {0}")]
    Lexicon(String),

    /// The profession span could not be located in the source sentence.
    #[error("source-alignment-failure: {0}")]
    SourceAlignment(String),

    #[error("profession not matched in translation of {0}")]
    NotMatched(String),

    #[error("attribution error: {0}")]
    Attribution(String),

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("exemplar selection error: {0}")]
    Selection(String),

    #[error("bootstrap error: {0}")]
    Bootstrap(String),

    #[error("translation backend error: {0}")]
    Backend(String),

    #[error("missing ids: {}", .0.join(", "))]
    MissingIds(Vec<String>),

    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Stable machine-readable kind used by the CLI error summary.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Validation(_) => "validation",
            Error::Format(_) => "format",
            Error::Lexicon(_) => "lexicon",
            Error::SourceAlignment(_) => "source-alignment-failure",
            Error::NotMatched(_) => "not-matched",
            Error::Attribution(_) => "attribution",
            Error::Metric(_) => "metric",
            Error::Selection(_) => "selection",
            Error::Bootstrap(_) => "bootstrap",
            Error::Backend(_) => "backend",
            Error::MissingIds(_) => "missing-ids",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
