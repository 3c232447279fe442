use std::io;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{what} out of range: {detail}")]
    OutOfRange { what: &'static str, detail: String },

    #[error("{what}: size {size} exceeds the oracle limit {limit}")]
    SizeGuard {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("invalid adjacency: {0}")]
    InvalidAdjacency(String),

    #[error("adjacency is not symmetric at ({row}, {col}): difference {diff:e}")]
    Asymmetric { row: usize, col: usize, diff: f64 },

    #[error("adjacency entry ({row}, {col}) has non-binary weight {weight}")]
    NonBinary { row: usize, col: usize, weight: f64 },

    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported format: {0}")]
    Format(String),

    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 for bad input, 2 for a broken internal invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invariant(_)
            | Error::InvalidAdjacency(_)
            | Error::Asymmetric { .. }
            | Error::NonBinary { .. }
            | Error::SizeGuard { .. }
            | Error::Shape { .. } => 2,
            _ => 1,
        }
    }

    pub(crate) fn out_of_range(what: &'static str, detail: impl Into<String>) -> Self {
        Error::OutOfRange {
            what,
            detail: detail.into(),
        }
    }
}
