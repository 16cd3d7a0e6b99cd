use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error(
        "imaginary residue {residue:.3e} exceeds tolerance {limit:.3e} (broken conjugate symmetry)"
    )]
    ImaginaryResidue { residue: f64, limit: f64 },

    #[error("singular block matrix at frequency bin {bin}")]
    SingularBin { bin: usize },

    #[error("prox did not converge after {iterations} iterations (z = {z}, last x = {x})")]
    ProxNotConverged { iterations: usize, z: f64, x: f64 },

    #[error("asymmetric matrix: |m[{row}][{col}] - m[{col}][{row}]| = {gap:.3e}")]
    Asymmetric { row: usize, col: usize, gap: f64 },

    #[error("oracle size limit exceeded: {size} rows > {limit}")]
    SizeLimit { size: usize, limit: usize },

    #[error("integration produced a non-finite state at t = {time}")]
    NonFinite { time: f64 },

    #[error("implicit step did not converge at t = {time}")]
    StepNotConverged { time: f64 },

    #[error("no mean crossings found; trajectory is not oscillatory")]
    NoOscillation,

    #[error("config parse error at line {line}, column {column} (byte {offset}): {message}")]
    Parse {
        line: usize,
        column: usize,
        offset: usize,
        message: String,
    },

    #[error("unknown {registry} strategy `{name}` (known: {known})")]
    UnknownStrategy {
        registry: &'static str,
        name: String,
        known: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field: field.into(),
        reason: reason.into(),
    }
}
