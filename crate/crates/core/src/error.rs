use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("rays {rays:?} do not generate a strictly convex cone with these rays as extreme rays")]
    NonConvexCone { rays: Vec<usize> },

    #[error("cones {first:?} and {second:?} do not intersect in a common face")]
    ImproperIntersection { first: Vec<usize>, second: Vec<usize> },

    #[error("cone {0:?} is not a cone of this fan")]
    ConeNotInFan(Vec<usize>),

    #[error("invalid fan: {0}")]
    InvalidFan(String),

    #[error("source cone {source_cone} is not contained in any cone of the target fan")]
    NotContained { source_cone: usize },

    #[error("the fan map is not proper: {0}")]
    NotProper(String),

    #[error("star of cone {cone} does not project to a fan: {reason}")]
    QuotientNotFan { cone: usize, reason: String },

    #[error("window exhausted at cone {cone}, degree {degree}: new generators in the guard zone; enlarge --degree-max")]
    WindowExhausted { cone: usize, degree: i32 },

    #[error("cone {cone}: module is not free on the window (degree {degree})")]
    NotFree { cone: usize, degree: i32 },

    #[error("cone {cone}: differential is not surjective onto the boundary kernel in degree {degree}")]
    NotLocallyExact { cone: usize, degree: i32 },

    #[error("cone {cone}: negative residual in degree {degree}")]
    NegativeResidual { cone: usize, degree: i32 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("certificate failure: {0}")]
    Certificate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse { line, message: message.into() }
    }

    /// Process exit code: 1 certificate failure, 2 input error, 3 window exhausted.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::WindowExhausted { .. } => 3,
            Error::Parse { .. }
            | Error::NonConvexCone { .. }
            | Error::ImproperIntersection { .. }
            | Error::ConeNotInFan(_)
            | Error::InvalidFan(_)
            | Error::NotContained { .. }
            | Error::NotProper(_)
            | Error::QuotientNotFan { .. }
            | Error::Precondition(_)
            | Error::Io(_) => 2,
            Error::NotFree { .. }
            | Error::NotLocallyExact { .. }
            | Error::NegativeResidual { .. }
            | Error::Certificate(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
