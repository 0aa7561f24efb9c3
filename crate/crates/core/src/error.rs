use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain: {expected}")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    Dimension {
        expected: usize,
        actual: usize,
        context: &'static str,
    },
    #[error("infeasible signal: {0}")]
    InfeasibleSignal(String),
    #[error("measurement set is empty")]
    EmptyMeasurements,
    #[error("sparsity budget k = {k} is invalid for m = {m} measurements")]
    SparsityBudget { k: usize, m: usize },
    #[error("reference frame has zero norm")]
    ZeroReference,
    #[error("missing {0}")]
    Missing(&'static str),
    #[error("calibration table is empty or not monotone")]
    BadCalibration,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_domain(name: &'static str, value: f64, ok: bool, expected: &'static str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Domain { name, value, expected })
    }
}
