use std::path::PathBuf;

use thiserror::Error;

use crate::stage_model::StageLabel;

/// Errors produced anywhere in the generation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid stage label {0}: expected a value in 1..=6")]
    InvalidStage(i64),

    #[error("no sequences")]
    NoSequences,

    #[error("invalid transition model: {0}")]
    InvalidModel(String),

    #[error("absorbing stage at max duration (stage {0})")]
    AbsorbingStage(StageLabel),

    #[error("empty mask")]
    EmptyMask,

    #[error("ambiguous object: mask has {0} connected components")]
    AmbiguousObject(usize),

    #[error("object too small: {0} pixels")]
    ObjectTooSmall(usize),

    #[error("insufficient shapes for stage {stage}: got {got}, need at least 2")]
    InsufficientShapes { stage: StageLabel, got: usize },

    #[error("requested {requested} modes but model has only {available} positive eigenvalues")]
    TooManyModes { requested: usize, available: usize },

    #[error("no shape model available for any stage")]
    NoShapeModels,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed patch index {path}: {reason}")]
    MalformedIndex { path: PathBuf, reason: String },

    #[error("invalid texture patch {path}: {reason}")]
    InvalidPatch { path: PathBuf, reason: String },

    #[error("invalid input data: {0}")]
    InvalidInput(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    /// True for errors caused by bad user input rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Image { .. })
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
