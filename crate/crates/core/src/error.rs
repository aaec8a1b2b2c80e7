use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, MstError>;

#[derive(Debug, Error)]
pub enum MstError {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("capacity exceeded: {requested} rows requested, cap is {cap}")]
    Capacity { requested: u64, cap: u64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("failed to load dataset: {0}")]
    Load(String),

    #[error("consistency check failed: {0}")]
    Consistency(String),

    #[error("non-finite loss at epoch {epoch} (learning rate too high?)")]
    NonFiniteLoss { epoch: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl MstError {
    /// Short machine-readable category, also used to pick the CLI exit code.
    pub fn category(&self) -> &'static str {
        match self {
            MstError::Dimension { .. } => "dimension",
            MstError::Validation(_) => "validation",
            MstError::Capacity { .. } => "capacity",
            MstError::Config(_) => "config",
            MstError::Parse { .. } => "parse",
            MstError::Load(_) => "load",
            MstError::Consistency(_) => "consistency",
            MstError::NonFiniteLoss { .. } => "non-finite",
            MstError::Checkpoint(_) => "checkpoint",
            MstError::Io { .. } => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            MstError::Config(_) => 2,
            MstError::Parse { .. } => 3,
            MstError::Load(_) | MstError::Io { .. } => 4,
            MstError::Dimension { .. } | MstError::Checkpoint(_) => 5,
            MstError::Validation(_) | MstError::Capacity { .. } => 6,
            MstError::Consistency(_) => 7,
            MstError::NonFiniteLoss { .. } => 8,
        }
    }

    /// Prefixes the message with `ctx`, keeping the category.
    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        match self {
            MstError::Validation(m) => MstError::Validation(format!("{ctx}: {m}")),
            MstError::Config(m) => MstError::Config(format!("{ctx}: {m}")),
            MstError::Load(m) => MstError::Load(format!("{ctx}: {m}")),
            MstError::Consistency(m) => MstError::Consistency(format!("{ctx}: {m}")),
            MstError::Checkpoint(m) => MstError::Checkpoint(format!("{ctx}: {m}")),
            MstError::Parse { path, line, msg } => MstError::Parse {
                path,
                line,
                msg: format!("{ctx}: {msg}"),
            },
            MstError::Dimension { op, left, right } => {
                log::error!("{ctx}: dimension mismatch in {op}");
                MstError::Dimension { op, left, right }
            }
            other => {
                log::error!("{ctx}: {other}");
                other
            }
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MstError::Io {
            path: path.into(),
            source,
        }
    }
}
