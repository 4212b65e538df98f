use thiserror::Error;

/// Errors produced by dataset construction, selection, fitting, and the
/// information-matrix routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyData,
    #[error("non-finite {what} at row {row}, column {col}")]
    NonFinite {
        what: &'static str,
        row: usize,
        col: usize,
    },
    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("csv parse failure at line {line}, column `{column}`: {message}")]
    CsvParse {
        line: u64,
        column: String,
        message: String,
    },
    #[error("response column `{name}` not found in csv header")]
    MissingResponseColumn { name: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("π does not sum to 1: sum = {sum}")]
    PiNotSimplex { sum: f64 },
    #[error("π not positive for cluster {cluster}: {value}")]
    PiNotPositive { cluster: usize, value: f64 },
    #[error("σ² not positive for cluster {cluster}: {value} (floor 1e-10)")]
    Sigma2NotPositive { cluster: usize, value: f64 },

    #[error("k/(2p) must be an integer: k={k}, p={p}")]
    PerTailNotInteger { k: usize, p: usize },
    #[error("subdata size k={k} must be at least 2p={min}")]
    SubdataTooSmall { k: usize, min: usize },
    #[error("subdata size k={k} exceeds data size N={n}")]
    SubdataExceedsData { k: usize, n: usize },
    #[error("subdata size must be positive")]
    ZeroSubdata,

    #[error("subset is empty")]
    EmptySubset,
    #[error("cluster count G={g} is invalid")]
    InvalidClusterCount { g: usize },
    #[error("subset of size {got} cannot identify {g} clusters (need ≥ {needed})")]
    SubsetTooSmallForFit { got: usize, needed: usize, g: usize },
    #[error("weighted Gram matrix is singular for cluster {cluster}")]
    SingularGram { cluster: usize },
    #[error("cluster {cluster} has zero total responsibility")]
    EmptyCluster { cluster: usize },
    #[error("all {restarts} EM restarts degenerate")]
    AllRestartsDegenerate { restarts: usize },
    #[error("cluster count mismatch: {left} vs {right}")]
    ClusterCountMismatch { left: usize, right: usize },

    #[error("overlap integral requires two distinct clusters, got g1 = g2 = {g}")]
    SameCluster { g: usize },
    #[error("quadrature did not reach tolerance {requested:e}: achieved error {achieved:e}")]
    QuadratureNonConvergence { requested: f64, achieved: f64 },
    #[error("correlation matrix is singular")]
    SingularCorrelation,
    #[error("covariance matrix is not symmetric positive definite")]
    NotSpd,

    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
