use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The coupling must satisfy 0 <= g < 1/2 for the traps to stay bound.
    #[error("coupling g = {0} outside the stable range [0, 1/2)")]
    UnstableCoupling(f64),
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("missing parameter: {0}")]
    MissingParameter(&'static str),
    #[error("covariance matrix violates the uncertainty relation (margin {0:e})")]
    Heisenberg(f64),
    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),
    #[error("singular quadratic form")]
    Singular,
    #[error("trace has an imaginary residue of {0:e}")]
    ImaginaryResidue(f64),
    #[error("integration did not converge: {0}")]
    NonConvergence(String),
    #[error("Fock truncation leakage {leakage:e} exceeds {limit:e}")]
    Leakage { leakage: f64, limit: f64 },
    #[error("time grids do not match: {0}")]
    GridMismatch(String),
}

pub(crate) fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be positive and finite",
        })
    }
}

pub(crate) fn non_negative(name: &'static str, value: f64) -> Result<f64> {
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be non-negative and finite",
        })
    }
}
