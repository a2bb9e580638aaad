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

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate aggregate: {0}")]
    DegenerateAggregate(String),

    /// The marginal value of wealth is not positive, so the first-order
    /// condition has no interior solution. Callers fall back to the
    /// state-constraint consumption bound.
    #[error("non-positive marginal value {0}")]
    NonPositiveMarginal(f64),

    #[error("state constraint violated at node {node}: drift {drift}")]
    StateConstraint { node: usize, drift: f64 },

    #[error("linear solve failed at row {row}: pivot {pivot:e} (diagonal dominance margin {margin:e})")]
    LinearSolve { row: usize, pivot: f64, margin: f64 },

    #[error("{what} did not converge after {iterations} iterations (last residual {last:e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("operator is reducible: stationary density is not unique ({0})")]
    NonUnique(String),

    #[error("at t = {time}: {source}")]
    AtDate { time: f64, source: Box<Error> },
}

impl Error {
    pub fn invalid(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn at_date(self, time: f64) -> Self {
        Error::AtDate {
            time,
            source: Box::new(self),
        }
    }

    /// Innermost error, with date annotations stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtDate { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_convergence(&self) -> bool {
        matches!(
            self.root(),
            Error::Convergence { .. } | Error::Calibration(_)
        )
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
