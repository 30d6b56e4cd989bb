use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{what} must lie in {range}, got {value}")]
    Domain {
        what: &'static str,
        range: &'static str,
        value: f64,
    },

    #[error("index {index} out of range for {len} items")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("statistics undefined for an empty interaction matrix")]
    EmptyData,

    #[error("model {0} has not been fitted")]
    Unfitted(&'static str),

    #[error("{model}: {items} items exceed the dense-matrix cap of {cap} items")]
    Capacity { model: String, items: usize, cap: usize },

    #[error("unknown item label {label:?}{}", format_suggestions(.suggestions))]
    UnknownLabel { label: String, suggestions: Vec<String> },

    #[error("corrupt binary file: {0}")]
    Format(String),
}

fn format_suggestions(suggestions: &[String]) -> String {
    if suggestions.is_empty() {
        String::new()
    } else {
        format!("; did you mean one of: {}", suggestions.join(", "))
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Prefixes configuration and capacity errors with the dataset they came from.
    pub fn with_context(self, context: &str) -> Self {
        match self {
            Error::Capacity { model, items, cap } => Error::Capacity {
                model: format!("{model} on {context}"),
                items,
                cap,
            },
            Error::Config(msg) => Error::Config(format!("{context}: {msg}")),
            other => other,
        }
    }
}

pub(crate) fn check_unit_interval(what: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            range: "[0, 1]",
            value,
        })
    }
}

pub(crate) fn check_non_negative(what: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            range: "[0, inf)",
            value,
        })
    }
}
