use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("component index {index} out of range for {len} components")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("problem has no components")]
    EmptyProblem,
    #[error("malformed block structure: {0}")]
    BlockStructure(String),
    #[error("epoch exhausted: all {0} indices of the current permutation were consumed")]
    EpochExhausted(usize),
    #[error("epoch {epoch} begun with {remaining} indices of the previous epoch unconsumed")]
    MidEpoch { epoch: usize, remaining: usize },
    #[error("schedule covers {schedule} components but the problem has {problem}")]
    ScheduleMismatch { schedule: usize, problem: usize },
    #[error("snapshot operator cache is stale")]
    InvalidCache,
    #[error("matrix is singular to working precision")]
    SingularMatrix,
    #[error("problem has no reference solution")]
    MissingReference,
    #[error("reference point has residual {residual:e}, above tolerance {tolerance:e}")]
    ReferenceRejected { residual: f64, tolerance: f64 },
    #[error("grid {height}x{width} is not divisible into {block}x{block} blocks")]
    IndivisibleGrid {
        height: usize,
        width: usize,
        block: usize,
    },
    #[error("grid {height}x{width} is too small (need at least 2x2)")]
    DegenerateGrid { height: usize, width: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("batch size {batch} exceeds sample count {samples}")]
    BatchTooLarge { batch: usize, samples: usize },
    #[error("iteration cap {iterations} reached with residual {residual:e} above {tolerance:e}")]
    IterationCap {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },
    #[error("trace is missing metric `{0}`")]
    MissingMetric(&'static str),
    #[error("fit window invalid: {0}")]
    FitWindow(String),
    #[error("malformed trace csv at line {line}: {reason}")]
    TraceFormat { line: usize, reason: String },
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
