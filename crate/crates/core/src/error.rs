//! Crate-wide error aggregation and the process exit-code contract:
//! 0 success, 2 config error, 3 data error, 4 runtime error.

use thiserror::Error;

use crate::codec::CodecError;
use crate::config::ConfigError;
use crate::dataset::DatasetError;
use crate::eval::EvalError;
use crate::iforest::IForestError;
use crate::matrix::MatrixError;
use crate::ocsvm::OcSvmError;
use crate::profile::ProfileError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    IForest(#[from] IForestError),
    #[error(transparent)]
    OcSvm(#[from] OcSvmError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("cannot write {path}: {source}")]
    WriteFile { path: String, source: std::io::Error },
    #[error("cannot read {path}: {source}")]
    ReadFile { path: String, source: std::io::Error },
    #[error("report error: {0}")]
    Report(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{stage} stage: {source}")]
    Stage { stage: &'static str, source: Box<Error> },
}

impl Error {
    /// Tags an error with the pipeline stage that produced it.
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }

    /// Process exit code classifying the failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Dataset(_) => 3,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 4,
        }
    }
}

/// Extension for attaching a stage name to pipeline failures.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, Error>;
}

impl<T, E: Into<Error>> StageExt<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T, Error> {
        self.map_err(|e| e.into().at_stage(stage))
    }
}
