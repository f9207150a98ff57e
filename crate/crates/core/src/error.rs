use alloc::string::String;
use core::fmt;

/// Errors raised by the integrator core.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// A pivot fell below the scale-relative threshold.
    Singular { pivot: f64, threshold: f64 },
    DimensionMismatch { expected: usize, found: usize },
    /// QR eigenvalue iteration hit its cap; `estimate` is the best spectral
    /// radius available at that point.
    NoConvergence { estimate: f64 },
    /// The Arnoldi start vector is numerically zero.
    ZeroStartVector,
    /// A Jacobian-vector product returned a non-finite value.
    JvpFailure,
    /// A right-hand-side evaluation returned a non-finite value.
    NonFinite,
    StepSizeUnderflow { t: f64, h: f64 },
    TooManySteps { t: f64, steps: usize },
    InvalidArgument(&'static str),
    Tableau(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Singular { pivot, threshold } => {
                write!(f, "singular matrix: pivot {pivot:e} below threshold {threshold:e}")
            }
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::NoConvergence { estimate } => {
                write!(f, "eigenvalue iteration did not converge (estimate {estimate:e})")
            }
            Error::ZeroStartVector => f.write_str("Krylov start vector is zero"),
            Error::JvpFailure => f.write_str("Jacobian-vector product produced a non-finite value"),
            Error::NonFinite => f.write_str("right-hand side produced a non-finite value"),
            Error::StepSizeUnderflow { t, h } => {
                write!(f, "step size underflow at t = {t:e} (h = {h:e})")
            }
            Error::TooManySteps { t, steps } => {
                write!(f, "step limit of {steps} reached at t = {t:e}")
            }
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Tableau(msg) => write!(f, "tableau: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
