use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("arclength {s} outside [0, {length}]")]
    Domain { s: f64, length: f64 },

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("degenerate cross-section: inflation ratio {rho} at s = {s}")]
    DegenerateSection { rho: f64, s: f64 },

    #[error("degenerate cable route at s = {s}: tangent has zero length")]
    DegenerateRoute { s: f64 },

    #[error("singular mass matrix at t = {t}; state = {state:?}")]
    SingularMass { t: f64, state: Vec<f64> },

    #[error("step size underflow at t = {t} (h = {h:e}); state = {state:?}")]
    StepUnderflow { t: f64, h: f64, state: Vec<f64> },

    #[error("statics did not converge after {iterations} iterations; residual history {residual_history:?}")]
    StaticsDiverged {
        iterations: usize,
        residual_history: Vec<f64>,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
