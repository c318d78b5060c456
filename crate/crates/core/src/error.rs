use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the resolvent evaluators, root finders and parsers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A Green-function sum hit a bath eigenvalue whose mode has weight on the requested sites.
    #[error("z = {z} coincides with bath eigenvalue {eigenvalue} (mode {mode}) carrying nonzero weight")]
    Pole {
        z: Complex64,
        eigenvalue: f64,
        mode: usize,
    },

    /// A rank-one (or rank-M) correction was requested exactly at one of its poles.
    #[error("evaluation at a pole of the resolvent: {0}")]
    AtPole(String),

    #[error("z = {z} lies on the band of the infinite chain; the closed form needs Im z != 0")]
    BranchCut { z: Complex64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid regime: {0}")]
    InvalidRegime(String),
}

pub type Result<T> = std::result::Result<T, Error>;
