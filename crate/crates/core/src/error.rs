use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("point {0:?} lies outside the target radius {1}")]
    OutsideTarget([f64; 3], f64),
    #[error("rejection sampler acceptance probability {0:.3e} is below 1e-6")]
    DegenerateGeometry(f64),
    #[error("ray arrival {arrival_ns:.3} ns does not fit in the {frame_ns} ns frame")]
    FrameOverflow { arrival_ns: f64, frame_ns: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("series did not converge after {0} terms")]
    NoConvergence(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
