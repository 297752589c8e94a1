use thiserror::Error;

use crate::expr::ParseError;

/// Errors produced by the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("expression `{expr}` is not finite at x = {x}")]
    Evaluation { expr: String, x: f64 },

    #[error("point {x} lies outside [0, 1]")]
    Domain { x: f64 },

    #[error("resolution mismatch: {left} vs {right}")]
    ResolutionMismatch { left: usize, right: usize },

    #[error("invalid grid resolution {0}: must be even and at least 16")]
    InvalidResolution(usize),

    #[error("sample {index} is not finite")]
    NonFiniteSample { index: usize },

    #[error("cannot differentiate `{0}`: min/max of an x-dependent argument")]
    UnsupportedDerivative(String),

    #[error("invalid map `{expr}`: {reason}")]
    InvalidMap { expr: String, reason: String },

    #[error("invalid equation: {0}")]
    InvalidSpec(String),

    #[error("integrand `{expr}` is negative ({value}) at y = {y}")]
    NegativeIntegrand { expr: String, y: f64, value: f64 },

    #[error("P^{k} g vanishes; the finite-sum shortcut applies")]
    DegenerateInstance { k: usize },

    #[error("operator is not a contraction (C = {0})")]
    NotContraction(f64),

    #[error("invalid solver parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown corpus entry `{0}`")]
    UnknownEntry(String),

    #[error("parameter `{name}` = {value} out of range: {range}")]
    ParamOutOfRange { name: String, value: f64, range: String },
}

pub type Result<T> = std::result::Result<T, Error>;
