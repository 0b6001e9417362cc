use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid too coarse: {interior} interior nodes, at least 3 required")]
    TooCoarse { interior: usize },
    #[error("domain is empty")]
    DegenerateDomain,
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("point is {distance:.3e} away from the boundary")]
    NotOnBoundary { distance: f64 },
    #[error("exterior normal undefined at a box corner")]
    UnsupportedBoundary,
    #[error("N = {n} must exceed p*s = {ps}")]
    CriticalDimension { n: usize, ps: f64 },
    #[error("field and weights are defined on different grids")]
    GridMismatch,
    #[error("operation requires a nonzero field")]
    ZeroField,
    #[error("exponent q = {q} outside the admissible range ({lo}, {hi})")]
    InvalidExponent { q: f64, lo: f64, hi: f64 },
    #[error("Kelvin transform evaluated at its pole")]
    PoleEvaluation,
    #[error("truncation radius theta = {0} must exceed 1")]
    InvalidTheta(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("minimizer did not converge after {iterations} iterations (relative gradient {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("domain is not a ball or annulus centered at the origin")]
    NotRadialDomain,
    #[error("domain is not an annulus")]
    NotAnnulus,
    #[error("measure has zero total mass")]
    ZeroMeasure,
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
