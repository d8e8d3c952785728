use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("trajectory has no steps")]
    EmptyTrajectory,

    #[error("time step must be finite and positive, got {0}")]
    InvalidTimeStep(f64),

    #[error("wrench list length {wrenches} does not match pose count {poses}")]
    LengthMismatch { poses: usize, wrenches: usize },

    #[error("quaternion ({w}, {x}, {y}, {z}) cannot be normalized")]
    DegenerateQuaternion { w: f64, x: f64, y: f64, z: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Inputs that are individually valid but do not fit together (an edit
    /// segment that does not end on the demonstration, a corrected trajectory
    /// of the wrong length, ...).
    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),

    #[error("calibration impossible: {0}")]
    Calibration(String),

    #[error(transparent)]
    Format(#[from] crate::io::FormatError),

    #[error("config: {0}")]
    Config(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn inconsistent(msg: impl Into<String>) -> Self {
        Error::Inconsistent(msg.into())
    }
}
