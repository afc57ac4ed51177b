use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// No sign change could be located, or the solver failed to converge.
    #[error("root finding failed: {0}")]
    Solver(String),

    #[error("quadrature did not converge: achieved error {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    /// The sufficient condition of the general dominance result does not apply.
    #[error("theorem inapplicable: {0}")]
    Inapplicable(String),

    #[error("epsilon indistinguishable from zero: estimate {value:e} with standard error {stderr:e}")]
    EpsilonIndistinguishableFromZero { value: f64, stderr: f64 },

    #[error("degenerate estimator: {0}")]
    Degenerate(String),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
