use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ambient dimension must be 2 or 3, got {0}")]
    UnsupportedDimension(usize),

    #[error("index {index} out of range for {len} agents")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("edge ({0}, {1}) has coincident endpoints")]
    DegenerateEdge(usize, usize),

    #[error("plane normal must be non-zero")]
    ZeroNormal,

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("measurement kind mismatch: expected {expected}, got {actual}")]
    KindMismatch { expected: String, actual: String },

    #[error("configuration is not infinitesimally rigid (rank {rank}, maximal rank {max_rank})")]
    NotRigid { rank: usize, max_rank: usize },

    #[error("block null space property of order {s} is violated (tau_bar = {tau_bar})")]
    NspViolated { s: usize, tau_bar: f64 },

    #[error("infeasible subproblem: slack {slack:e} is below the least-squares residual {residual:e}")]
    Infeasible { slack: f64, residual: f64 },

    #[error("oracle guard exceeded: {0}")]
    GuardExceeded(String),

    #[error("no exact solution with at most {0} non-zero blocks")]
    NoExactSolution(usize),

    #[error("kernel is trivial for every block subset of size up to {0}")]
    NoKernelWithinCap(usize),

    #[error("network generation failed: {0}")]
    Generation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
