use std::fmt;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by graph construction, problem assembly, line searches
/// and the message-passing engine.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Caller passed malformed data (dimension mismatch, bad node id, ...).
    InvalidArgument(String),
    /// A documented precondition does not hold for the given inputs.
    PreconditionViolation(String),
    /// The instance is numerically degenerate (e.g. zero Hessian diagonal).
    DegenerateInstance(String),
    /// Backtracking exhausted its safety cap without satisfying the
    /// acceptance inequality; carries the last evaluated inequality sides.
    LineSearchFailure {
        backtracks: u32,
        node: Option<usize>,
        lhs: f64,
        rhs: f64,
    },
    /// The message-passing engine observed a locality or protocol violation.
    ProtocolFault(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::PreconditionViolation(msg) => write!(f, "precondition violated: {msg}"),
            Error::DegenerateInstance(msg) => write!(f, "degenerate instance: {msg}"),
            Error::LineSearchFailure {
                backtracks,
                node,
                lhs,
                rhs,
            } => match node {
                Some(i) => write!(
                    f,
                    "line search failed at node {i} after {backtracks} backtracks \
                     (lhs {lhs:e} > rhs {rhs:e})"
                ),
                None => write!(
                    f,
                    "line search failed after {backtracks} backtracks (lhs {lhs:e} > rhs {rhs:e})"
                ),
            },
            Error::ProtocolFault(msg) => write!(f, "protocol fault: {msg}"),
        }
    }
}

impl std::error::Error for Error {}
