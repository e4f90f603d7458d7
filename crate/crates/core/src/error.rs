use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no convergence after {iterations} iterations (best estimate {estimate})")]
    NonConvergence { iterations: usize, estimate: f64 },
    #[error("no sign change on [{lo}, {hi}]: g(lo)={g_lo}, g(hi)={g_hi}")]
    NoSignChange { lo: f64, hi: f64, g_lo: f64, g_hi: f64 },
    #[error("objective is not finite at x={x}")]
    InvalidObjective { x: f64 },
    #[error("density queried at an atom located at {at}")]
    AtomAtPoint { at: f64 },
    #[error("density is not differentiable at {at}")]
    NotDifferentiable { at: f64 },
    #[error("mixture weights invalid: {0}")]
    BadWeights(String),
    #[error("signal value y={y} has zero probability")]
    DegeneratePosterior { y: u8 },
    #[error("density vanishes at p={at}")]
    ZeroDensity { at: f64 },
    #[error("cdf vanishes at p={at}")]
    ZeroQuantity { at: f64 },
    #[error("price is zero")]
    ZeroPrice,
    #[error("profit is not strictly concave at p={at} (second derivative {value})")]
    NonConcaveAtOptimum { at: f64, value: f64 },
    #[error("restriction r={r} outside [0, {max}]")]
    RangeError { r: f64, max: f64 },
    #[error("check requires f1 to be a point mass at zero")]
    WrongAnchoring,
    #[error("distribution has an atom; condition is not defined")]
    AtomPresent,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
