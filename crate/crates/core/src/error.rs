use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum DmlError {
    #[error("cannot partition {n} rows into {folds} folds (need n >= 2L and L >= 2)")]
    PartitionInfeasible { n: usize, folds: usize },

    #[error("empty local window: no observation has a nonzero kernel value at point {point} with bandwidth {bandwidth}")]
    EmptyWindow { point: f64, bandwidth: f64 },

    #[error("covariate has zero variance; bandwidth heuristic is degenerate")]
    DegenerateCovariate,

    #[error("functional {0} requires an analytic d-derivative which this predictor does not provide")]
    UnsupportedFunctional(&'static str),

    #[error("propensity {value} outside overlap region ({delta}, {})", 1.0 - .delta)]
    OverlapViolation { value: f64, delta: f64 },

    #[error("training diverged: loss became non-finite at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("scale parameter sigma must be positive, got {0}")]
    UndefinedScale(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("ingestion error at row {row}: {message}")]
    Ingestion { row: usize, message: String },

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<DmlError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl DmlError {
    pub(crate) fn in_fold(self, fold: usize) -> Self {
        match self {
            e @ DmlError::Fold { .. } => e,
            other => DmlError::Fold { fold, source: Box::new(other) },
        }
    }

    /// Short machine-readable tag, used in structured error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            DmlError::PartitionInfeasible { .. } => "partition-infeasible",
            DmlError::EmptyWindow { .. } => "empty-window",
            DmlError::DegenerateCovariate => "degenerate-covariate",
            DmlError::UnsupportedFunctional(_) => "unsupported-functional",
            DmlError::OverlapViolation { .. } => "overlap-violation",
            DmlError::TrainingDiverged { .. } => "training-diverged",
            DmlError::UndefinedScale(_) => "undefined-scale",
            DmlError::InvalidArgument(_) => "invalid-argument",
            DmlError::InvalidData(_) => "invalid-data",
            DmlError::Ingestion { .. } => "ingestion",
            DmlError::Fold { source, .. } => source.kind(),
            DmlError::Io(_) => "io",
            DmlError::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, DmlError>;
