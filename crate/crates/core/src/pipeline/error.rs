use std::fmt;

use thiserror::Error;

use crate::detect::DetectError;
use crate::eval::EvalError;
use crate::ingest::IngestError;
use crate::llm::LlmError;
use crate::preprocess::PreprocessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Inspect,
    Clean,
    Detect,
    Evaluate,
    Diagnose,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Inspect => "inspect",
            Stage::Clean => "clean",
            Stage::Detect => "detect",
            Stage::Evaluate => "evaluate",
            Stage::Diagnose => "diagnose",
            Stage::Write => "write",
        })
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A stage failure; displays as `<stage>: <cause>`.
#[derive(Debug, Error)]
#[error("{stage}: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: StageError,
}

fn ingest_code(e: &IngestError) -> i32 {
    match e {
        IngestError::EmptyAfterCleaning(_) => 3,
        IngestError::Io(_) => 1,
        _ => 2,
    }
}

fn preprocess_code(e: &PreprocessError) -> i32 {
    match e {
        PreprocessError::MissingGeometry | PreprocessError::InvalidGeometry(_) => 4,
        PreprocessError::Empty => 3,
        PreprocessError::BadWindow(_) => 2,
    }
}

impl PipelineError {
    pub fn new(stage: Stage, source: StageError) -> Self {
        Self { stage, source }
    }

    /// 0 ok, 1 internal, 2 unreadable input or bad config, 3 empty after
    /// cleaning, 4 missing geometry, 5 model failure without fallback.
    pub fn exit_code(&self) -> i32 {
        match &self.source {
            StageError::Config(_) => 2,
            StageError::Ingest(e) => ingest_code(e),
            StageError::Preprocess(e) => preprocess_code(e),
            StageError::Detect(DetectError::Preprocess(e)) => preprocess_code(e),
            StageError::Detect(DetectError::InvalidParams(_)) => 2,
            StageError::Detect(_) => 1,
            StageError::Eval(_) => 1,
            StageError::Llm(LlmError::Ingest(e)) => ingest_code(e),
            StageError::Llm(_) => 5,
            StageError::Io(_) => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_prefixes_stage() {
        let e = PipelineError::new(Stage::Detect, PreprocessError::MissingGeometry.into());
        assert!(e.to_string().starts_with("detect: "));
        assert_eq!(e.exit_code(), 4);
    }

    #[test]
    fn codes() {
        let e = PipelineError::new(Stage::Inspect, IngestError::UnreadableInput("x".into()).into());
        assert_eq!(e.exit_code(), 2);
        let e = PipelineError::new(Stage::Diagnose, LlmError::ProviderTimeout.into());
        assert_eq!(e.exit_code(), 5);
        let e = PipelineError::new(Stage::Config, StageError::Config("offline".into()));
        assert_eq!(e.exit_code(), 2);
    }
}
