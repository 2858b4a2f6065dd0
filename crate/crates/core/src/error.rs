use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("series truncation failed: {0}")]
    Divergence(String),
    #[error("density {0} outside the admissible open interval (0, {1})")]
    Boundary(f64, f64),
    #[error("sector has {0} states, exceeding the cap of {1}")]
    SectorTooLarge(usize, usize),
    #[error("ode solve failed at t = {0}: {1}")]
    Solver(f64, String),
    #[error("elliptic solve stalled with relative residual {0:.3e}")]
    Elliptic(f64),
    #[error("zero-mobility transition carries current |j| = {0:.3e}")]
    ZeroMobilityCurrent(f64),
    #[error("total mass mismatch: {0} vs {1}")]
    MassMismatch(f64, f64),
    #[error("thinning envelope violated: actual rate {actual:.6e} exceeds envelope {envelope:.6e}")]
    EnvelopeViolation { actual: f64, envelope: f64 },
    #[error("{0}")]
    Numerics(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
