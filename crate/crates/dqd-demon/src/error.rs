use thiserror::Error;

#[derive(Debug, Error)]
pub enum DemonError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical range exceeded: {0}")]
    NumericalRange(String),

    #[error("degenerate steady state: singular gap {gap:.3e} below threshold")]
    DegenerateSteadyState { gap: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("time step too large: jump probability {0:.3e} per step exceeds the cap")]
    StepSize(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, DemonError>;
