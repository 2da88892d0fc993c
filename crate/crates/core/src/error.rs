use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid GARCH order ({p1},{p2}): {reason}")]
    InvalidOrder {
        p1: usize,
        p2: usize,
        reason: &'static str,
    },

    #[error("invalid parameter vector: {0}")]
    InvalidParams(String),

    #[error("invalid parameter box: {0}")]
    InvalidBox(String),

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("insufficient data: need {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate data: {0}")]
    Degenerate(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown data-generating process {0:?}")]
    UnknownDgp(String),

    #[error("shrinkage zeroed omega (omega_hat = {omega_hat}, c_n = {c_n}); enable protect_omega or raise the omega floor")]
    OmegaShrunk { omega_hat: f64, c_n: f64 },

    #[error("bootstrap failed: {0}")]
    Bootstrap(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_finite(xs: &[f64]) -> Result<()> {
    match xs.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}
