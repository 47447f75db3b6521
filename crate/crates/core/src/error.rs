//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid winding vector: {0}")]
    InvalidWinding(String),

    #[error("mismatched problems: {0}")]
    Mismatch(String),

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("empty constraint set")]
    EmptySet,

    #[error("certificate violation: {0}")]
    CertificateViolation(String),

    #[error("search budget exhausted; best margin {best_margin:.6}")]
    BudgetExhausted { best_margin: f64 },

    #[error("called far from a critical point (|grad| = {grad_norm:.3e})")]
    NotCritical { grad_norm: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
