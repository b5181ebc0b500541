use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PeakonError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("near-collision between peakons {left} and {right} at t = {time}")]
    NearCollision { left: usize, right: usize, time: f64 },

    #[error("matrix is numerically not positive definite (min/max eigenvalue ratio {ratio:e})")]
    Conditioning { ratio: f64 },

    #[error("{0} did not converge")]
    Convergence(String),

    #[error("modulation did not converge after {iterations} iterations (residual {residual:e})")]
    ModulationFailure { iterations: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, PeakonError>;
