use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot convert a zero-length vector to spherical coordinates")]
    ZeroVector,
    #[error("point lies behind the camera (depth {depth:.3e} m)")]
    BehindCamera { depth: f64 },
    #[error("not a rigid transform: {0}")]
    NonRigidTransform(String),
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("covariance is not symmetric positive definite")]
    InvalidCovariance,

    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("empty point set")]
    EmptyPointSet,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("empty input")]
    EmptyInput,
    #[error("count must be positive, got {0}")]
    NonPositiveCount(i64),
    #[error("grid has no positive mass")]
    AllZeroGrid,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("no lidar points in the angular neighborhood")]
    EmptyNeighborhood,
    #[error("anchor ({u}, {v}) lies outside the {width}x{height} image")]
    AnchorOutOfImage { u: f64, v: f64, width: usize, height: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("degenerate normalization range: a_max ({a_max}) must exceed a_min ({a_min})")]
    DegenerateRange { a_min: f64, a_max: f64 },
    #[error("empty dataset")]
    EmptyDataset,

    #[error("frame {0} carries no ground-truth radar signals")]
    NoGroundTruth(String),
    #[error("no lidar points project into the camera image")]
    EmptyLidar,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {len} bytes is not a multiple of the {record}-byte record size")]
    TruncatedFile {
        path: PathBuf,
        len: usize,
        record: usize,
    },
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt image header: {0}")]
    CorruptHeader(String),
    #[error("frame ids differ between prediction and ground truth: {0}")]
    FrameIdMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
