use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cutoff search exceeded the r_eps ceiling {ceiling} for eps = {eps}")]
    CutoffInfeasible { eps: f64, ceiling: f64 },

    #[error("t = {t} lies outside the profile domain [{lo}, {hi}]")]
    OutsideDomain { t: f64, lo: f64, hi: f64 },

    #[error("finite-difference step {h} too large at t = {t} (need t >= 2h from the axis)")]
    StepTooLarge { h: f64, t: f64 },

    #[error("metric is not invertible at the requested point")]
    SingularMetric,

    #[error("vector is not unit length in the metric (|v|^2 = {norm2})")]
    NonUnitVector { norm2: f64 },

    #[error("Jacobi eigenvalue {eigenvalue} exceeds clamp tolerance {tol}: K <= 0 violated")]
    PositiveCurvature { eigenvalue: f64, tol: f64 },

    #[error("degenerate lattice: {0}")]
    DegenerateLattice(String),

    #[error("lattice enumeration exceeded {limit} points (basis too degenerate)")]
    EnumerationOverflow { limit: usize },

    #[error("lattice parse error on line {line}: {msg}")]
    LatticeParse { line: usize, msg: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("interface mismatch on {interface}: relative error {error:e} > {tol:e}")]
    InterfaceMismatch {
        interface: String,
        error: f64,
        tol: f64,
    },

    #[error("root bracket [{lo}, {hi}] does not contain a sign change")]
    NoBracket { lo: f64, hi: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
