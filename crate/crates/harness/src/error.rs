use std::path::{Path, PathBuf};

use thiserror::Error;

/// Harness failures, each with a process exit code.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: navier_core::Error,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad file {}: {detail}", path.display())]
    Format { path: PathBuf, detail: String },

    #[error("acceptance failure: {0}")]
    Acceptance(String),
}

impl HarnessError {
    pub fn config(e: navier_core::Error) -> Self {
        HarnessError::Config(e.to_string())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 config, 3 solver or stage, 4 acceptance, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Format { .. } => 2,
            HarnessError::Stage { .. } => 3,
            HarnessError::Acceptance(_) => 4,
            HarnessError::Io { .. } => 1,
        }
    }
}

/// Attaches a stage name to core errors.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, HarnessError>;
}

impl<T> StageExt<T> for navier_core::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, HarnessError> {
        self.map_err(|source| HarnessError::Stage { stage, source })
    }
}
