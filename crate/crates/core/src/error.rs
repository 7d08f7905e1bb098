use thiserror::Error;

/// Boxed error type carried by evaluator failures.
pub type BoxError = Box<dyn std::error::Error + Send + Sync + 'static>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The measure is supported on fewer points than the requested number of
    /// orthonormal polynomials.
    #[error("recurrence broke down after {achieved} of {requested} polynomials")]
    Breakdown { achieved: usize, requested: usize },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("evaluator `{evaluator}` failed{}: {source}", at_point(.point))]
    Evaluation {
        evaluator: String,
        /// Input that failed, when the failure can be pinned to one point.
        point: Option<Vec<f64>>,
        #[source]
        source: BoxError,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn at_point(point: &Option<Vec<f64>>) -> String {
    match point {
        Some(p) => format!(" at {p:?}"),
        None => String::new(),
    }
}
