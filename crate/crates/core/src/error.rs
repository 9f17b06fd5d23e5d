use std::fmt;

use crate::fields::Point;

/// Everything that can go wrong in the library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("integrand is not finite ({value}) at node {node}")]
    Evaluation { node: Point, value: f64 },
    #[error("invalid surface: {0}")]
    InvalidSurface(String),
    #[error("out of domain: {0}")]
    OutOfDomain(String),
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("epsilon schedule overflow: {0}")]
    ScheduleOverflow(String),
    #[error("inconclusive at resolution: {0}")]
    Inconclusive(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl fmt::Display) -> Error {
    Error::InvalidArgument(msg.to_string())
}
