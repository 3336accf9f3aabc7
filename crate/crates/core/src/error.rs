use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not skew-symmetric (|W + W^T|_F = {0:.3e})")]
    NotSkew(f64),
    #[error("matrix is not symmetric (|S - S^T|_F = {0:.3e})")]
    NotSymmetric(f64),
    #[error("columns are not orthonormal (|p^T p - I|_F = {0:.3e})")]
    NotOrthonormal(f64),
    #[error("vector is not tangent at the base point (|x^T v| = {0:.3e})")]
    NotTangent(f64),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("direction is not an ascent direction (slope {0:.3e})")]
    NotAscent(f64),
    #[error("hessian is indefinite along the inner solve")]
    Indefinite,
    #[error("objective is not differentiable here: {0}")]
    NonDifferentiable(String),
    #[error("integration aborted at t = {0}: non-finite state")]
    IntegrationAborted(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
