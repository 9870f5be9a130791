use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PressureError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("orbit left the domain at time {time}")]
    DomainEscape { time: f64 },
    #[error("rescaled ball query hit a zero-speed sample at index {index}")]
    SingularOrbit { index: usize },
    #[error("degenerate measure: {0}")]
    DegenerateMeasure(String),
    #[error("entropy estimation failed: {0}")]
    EstimationFailure(String),
    #[error("infeasible cover: best reachable mass {max_mass} does not exceed {required}")]
    InfeasibleCover { max_mass: f64, required: f64 },
    #[error("argument {value} outside the valid range {range}")]
    Range { value: f64, range: String },
    #[error("compact sample is empty after filtering")]
    EmptyCompact,
    #[error("internal invariant failed: {0}")]
    Invariant(String),
}

pub type Result<T, E = PressureError> = std::result::Result<T, E>;

pub(crate) fn contract<S: Into<String>>(msg: S) -> PressureError {
    PressureError::Contract(msg.into())
}
