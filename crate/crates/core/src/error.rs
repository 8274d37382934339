use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("norm index must satisfy p > 1 or p = inf, got {0}")]
    InvalidNormIndex(f64),

    #[error("uniform ellipticity violated at cell {cell}: {detail}")]
    EllipticityViolation { cell: usize, detail: String },

    #[error("boundary normal is not an eigenvector at cell {cell} (defect {defect:.3e})")]
    EvViolation { cell: usize, defect: f64 },

    #[error("tensor is not symmetric at cell {cell} (defect {defect:.3e})")]
    NonSymmetric { cell: usize, defect: f64 },

    #[error("right-hand side is not mean-zero (relative mean {relative_mean:.3e})")]
    NotMeanZero { relative_mean: f64 },

    #[error("linear solve did not converge in {iterations} iterations (last residual {:.3e})", history.last().copied().unwrap_or(f64::NAN))]
    LinearSolveDivergence { iterations: usize, history: Vec<f64> },

    #[error("grid with {points} points exceeds the assembly cap of {cap}")]
    TooLargeToAssemble { points: usize, cap: usize },

    #[error("lambda = {re} + {im}i lies on the cut (-inf, 0]")]
    LambdaOnCut { re: f64, im: f64 },

    #[error("lambda = {re} + {im}i lies outside the sector: {detail}")]
    OutsideSector { re: f64, im: f64, detail: String },

    #[error("source means do not cancel (relative mean of s_i + s_e = {relative_mean:.3e})")]
    CompatibilityViolation { relative_mean: f64 },

    #[error("dual data must satisfy mean(psi_i) = mean(psi_e) (difference {difference:.3e})")]
    IncompatibleMeans { difference: f64 },

    #[error("theta = {0} is outside the open interval (-pi, pi)")]
    ThetaOutOfSector(f64),

    #[error("operator is not symmetric enough for a spectral decomposition (defect {defect:.3e})")]
    NonSymmetricOperator { defect: f64 },

    #[error("trust region exceeded at t = {time} (blow-up estimate t* = {blowup_estimate})")]
    TrustRegionExceeded { time: f64, blowup_estimate: f64 },

    #[error("spectral stepping requires constant conductivities on a fully periodic grid")]
    SpectralUnsupported,

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
