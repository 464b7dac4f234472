use std::fmt;

/// Errors surfaced by the simulator library.
#[derive(Debug)]
pub enum SimError {
    /// Bad configuration value or malformed config file. Carries the field/key name.
    Config(String),
    /// Invalid argument to an operation (length mismatch, non-finite input, ...).
    Validation(String),
    /// A run-time invariant that indicates a bug in the simulation loop itself.
    InternalInvariant(String),
    Io(std::io::Error),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Config(msg) => write!(f, "config error: {msg}"),
            SimError::Validation(msg) => write!(f, "validation error: {msg}"),
            SimError::InternalInvariant(msg) => write!(f, "internal invariant violated: {msg}"),
            SimError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for SimError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            SimError::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for SimError {
    fn from(e: std::io::Error) -> Self {
        SimError::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
