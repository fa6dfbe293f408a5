use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what} = {value} is outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
    #[error("problem too large: {0}")]
    TooLarge(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("internal consistency check failed: {0}")]
    Internal(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("bisection endpoints do not bracket a transition: {0}")]
    NonBracketing(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_range(what: &'static str, value: f64, lo: f64, hi: f64, domain: &'static str) -> Result<()> {
    if value.is_finite() && value >= lo && value <= hi {
        Ok(())
    } else {
        Err(Error::Domain { what, value, domain })
    }
}
