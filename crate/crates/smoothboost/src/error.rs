use thiserror::Error;

/// Errors produced by smoother construction, boosting, diagnostics and selection.
#[derive(Debug, Error)]
pub enum Error {
    /// All kernel weights vanished (compact-support kernel, query point or a
    /// whole design row outside the kernel support).
    #[error("kernel support error: {0}")]
    KernelSupport(String),

    /// The design makes the requested smoother singular (e.g. duplicate x
    /// values for a smoothing spline).
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    /// Invalid specification or input data.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Vector/matrix dimensions are inconsistent.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// tr(S_k) cannot be computed for this smoother at this size.
    #[error("trace unavailable: {0}")]
    TraceUnavailable(String),

    /// A selection criterion is undefined over the whole candidate set.
    #[error("degenerate criterion: {0}")]
    DegenerateCriterion(String),

    /// The requested operation does not apply to this input family.
    #[error("not applicable: {0}")]
    NotApplicable(String),

    /// Prediction or selection was requested at an iteration that was not
    /// recorded as a checkpoint.
    #[error("iteration {0} is not a recorded checkpoint")]
    CheckpointNotRecorded(usize),

    #[error("csv error: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
