//! Error type shared by every solver and certificate routine.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside the mathematical domain of the operation
    /// (e.g. a derivative order above the kernel smoothness).
    Domain(String),
    /// Structurally invalid input (duplicate points, negative amplitudes, ...).
    InvalidInput(String),
    /// A matrix that must have full column rank does not.
    RankDeficient(String),
    /// An iterative solver hit its iteration budget. `residual` carries the
    /// last duality gap or KKT residual.
    IterationLimit { what: String, residual: f64 },
    /// The constraint set of a dual problem is empty (source condition fails).
    Infeasible(String),
    /// A saturation pattern does not match any known configuration.
    Classification {
        sat_right: Vec<usize>,
        sat_left: Vec<usize>,
        msg: String,
    },
    /// A numeric probe could not complete (e.g. predicted support never seen).
    ProbeFailure(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::InvalidInput(m) => write!(f, "invalid input: {m}"),
            Error::RankDeficient(m) => write!(f, "rank-deficient operator: {m}"),
            Error::IterationLimit { what, residual } => {
                write!(f, "iteration limit in {what} (residual {residual:.3e})")
            }
            Error::Infeasible(m) => write!(f, "infeasible constraint set: {m}"),
            Error::Classification { sat_right, sat_left, msg } => write!(
                f,
                "unclassifiable saturation pattern {sat_right:?}/{sat_left:?}: {msg}"
            ),
            Error::ProbeFailure(m) => write!(f, "probe failure: {m}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
