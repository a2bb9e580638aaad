use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch for {what}: expected {expected}, found {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter `{key}`: {message}")]
    InvalidParameter { key: String, message: String },

    #[error("{what} row {row} is not a probability vector (sum {sum}, min {min})")]
    NotStochastic {
        what: String,
        row: usize,
        sum: f64,
        min: f64,
    },

    #[error(
        "enumerating {paths} aggregate paths exceeds the budget of {limit}; use the Monte Carlo estimator"
    )]
    Budget { paths: f64, limit: f64 },

    #[error("price {price} is not a node of the perceived kernel")]
    OffGrid { price: f64 },

    #[error(transparent)]
    Core(#[from] mfgl_core::Error),
}

impl Error {
    pub fn invalid(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Shape {
            what,
            expected,
            found,
        })
    }
}

/// Entries >= 0 and sum within `1e-12` of one.
pub(crate) fn check_stochastic(what: &str, row: usize, v: &[f64]) -> Result<()> {
    let sum: f64 = v.iter().sum();
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    if (sum - 1.0).abs() > 1e-12 || !(min >= 0.0) {
        return Err(Error::NotStochastic {
            what: what.to_string(),
            row,
            sum,
            min,
        });
    }
    Ok(())
}
