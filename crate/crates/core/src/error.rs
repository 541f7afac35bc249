use thiserror::Error;

/// Errors raised by the identifier, controller, simulator and experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("root finder did not converge: {0}")]
    NoConvergence(String),

    #[error("QP infeasible")]
    Infeasible,

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("controller failure at step {step}: {reason}")]
    Controller { step: usize, reason: String },

    #[error("trace schema mismatch: {0}")]
    Schema(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
