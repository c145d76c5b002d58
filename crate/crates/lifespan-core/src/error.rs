//! Error type shared by all modules.

/// Crate-wide error. Variants mirror the failure classes of the public
/// operations: parameter-domain violations, configuration problems, fit
/// degeneracies, and solver breakdowns.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A mathematical precondition does not hold (e.g. d ≤ 1 for the Strauss
    /// quadratic, δ < 0 for the discriminant).
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration field is missing, malformed, or inconsistent. The
    /// message names the field and the violated constraint.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A regression or fit could not be performed (too few points,
    /// degenerate abscissae).
    #[error("fit error: {0}")]
    Fit(String),

    /// A numerical solver left its validity envelope (non-positive
    /// eigenfunction, step underflow without blow-up signature, ...).
    #[error("solver error: {0}")]
    Solver(String),

    /// File I/O while emitting or consuming experiment artifacts.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn fit(msg: impl Into<String>) -> Self {
        Error::Fit(msg.into())
    }

    pub(crate) fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }
}
