use std::path::PathBuf;

use crate::model::FusionKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("both the complete and the missing batch are empty")]
    EmptyBatch,

    #[error("{path}: parse error on row {row}: {msg}")]
    Parse {
        path: PathBuf,
        row: usize,
        msg: String,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{path}: row {row}: label {label} is outside [0, {num_classes})")]
    UnknownLabel {
        path: PathBuf,
        row: usize,
        label: i64,
        num_classes: usize,
    },

    #[error("class {0} has no observed sample")]
    MissingClass(usize),

    #[error("zero padding is undefined for {0:?} fusion")]
    UnsupportedFusion(FusionKind),

    #[error("invalid config: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),

    #[error("training aborted: {diagnostic}")]
    TrainingAborted {
        diagnostic: String,
        last_state: Box<crate::model::ModelState>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable identifier used in machine-readable CLI errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape { .. } => "ShapeError",
            Error::Contract(_) => "ContractError",
            Error::Numerical(_) => "NumericalError",
            Error::EmptyBatch => "EmptyBatchError",
            Error::Parse { .. } => "ParseError",
            Error::DimensionMismatch(_) => "DimensionMismatchError",
            Error::UnknownLabel { .. } => "UnknownLabelError",
            Error::MissingClass(_) => "MissingClassError",
            Error::UnsupportedFusion(_) => "UnsupportedFusionError",
            Error::Config(_) => "ConfigError",
            Error::Io { .. } => "IoError",
            Error::Checkpoint(_) => "CheckpointError",
            Error::TrainingAborted { .. } => "TrainingAborted",
        }
    }
}
