use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid shape {0:?}: every array needs at least one dimension and all dims must be >= 1")]
    InvalidShape(Vec<usize>),
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("cannot reshape {from:?} ({from_len} elements) into {to:?} ({to_len} elements)")]
    ReshapeMismatch {
        from: Vec<usize>,
        to: Vec<usize>,
        from_len: usize,
        to_len: usize,
    },
    #[error("axis {axis} out of range for rank {rank}")]
    AxisOutOfRange { axis: usize, rank: usize },
    #[error("shapes {a:?} and {b:?} cannot be broadcast together")]
    Broadcast { a: Vec<usize>, b: Vec<usize> },
    #[error("slice index {index} out of bounds for dimension {dim} of size {size}")]
    IndexOutOfBounds { dim: usize, index: isize, size: usize },
    #[error("slice step must be non-zero (dimension {dim})")]
    ZeroStep { dim: usize },
    #[error("slice selects no elements in dimension {dim}")]
    EmptySelection { dim: usize },
    #[error("slice has {got} entries but the array has rank {rank}")]
    SliceRank { got: usize, rank: usize },
    #[error("index {index} appears more than once in dimension {dim} of set_fancy")]
    DuplicateIndex { dim: usize, index: usize },
    #[error("matrix operation expects rank 2, got shape {0:?}")]
    NotMatrix(Vec<usize>),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("matrix is singular to working precision (pivot {pivot:e} at column {column})")]
    Singular { column: usize, pivot: f64 },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("algodiff contract violated: {0}")]
    Contract(String),
    #[error("lazy variable {0} has no value assigned")]
    Unassigned(usize),
    #[error("unknown lazy node {0}")]
    UnknownNode(usize),
    #[error("invalid optimisation parameter: {0}")]
    InvalidParam(String),
    #[error("loss diverged to NaN after {} recorded iterations", history.len())]
    Divergence { history: Vec<f64> },
    #[error("labels must be -1 or 1, found {0}")]
    BadLabel(f64),
    #[error("empty input")]
    EmptyInput,
    #[error("unknown worker {0}")]
    UnknownWorker(usize),
    #[error("worker {0} already pushed in this round")]
    DoublePush(usize),
    #[error("no update function registered")]
    NotRegistered,
    #[error("operation `{0}` is not supported by the distributed engine")]
    Unsupported(&'static str),
    #[error("unknown benchmark operation `{0}`")]
    UnknownOp(String),
    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
