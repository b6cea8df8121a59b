use thiserror::Error;

use crate::cascade::CascadeError;
use crate::gslda::GsldaError;
use crate::io::IoError;
use crate::linalg::LinalgError;
use crate::ogslda::{OgsldaError, ThresholdError};
use crate::weak::WeakError;

/// Any failure of the library, with the process exit code it maps to.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Weak(#[from] WeakError),
    #[error(transparent)]
    Gslda(#[from] GsldaError),
    #[error(transparent)]
    Ogslda(#[from] OgsldaError),
    #[error(transparent)]
    Cascade(#[from] CascadeError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
}

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

fn threshold_code(e: &ThresholdError) -> i32 {
    match e {
        ThresholdError::EmptyClass => EXIT_DATA,
        ThresholdError::Unknown(_) => EXIT_USAGE,
        _ => EXIT_NUMERICAL,
    }
}

fn gslda_code(e: &GsldaError) -> i32 {
    match e {
        GsldaError::EmptyClass | GsldaError::InsufficientRank { .. } | GsldaError::DimensionMismatch { .. } => {
            EXIT_DATA
        }
        GsldaError::Threshold(t) => threshold_code(t),
        _ => EXIT_NUMERICAL,
    }
}

fn ogslda_code(e: &OgsldaError) -> i32 {
    match e {
        OgsldaError::DimensionMismatch { .. } => EXIT_DATA,
        OgsldaError::Threshold(t) => threshold_code(t),
        OgsldaError::Gslda(g) => gslda_code(g),
        _ => EXIT_NUMERICAL,
    }
}

fn cascade_code(e: &CascadeError) -> i32 {
    match e {
        CascadeError::InvalidConfig(_) => EXIT_USAGE,
        CascadeError::GoalUnreachable { .. } => EXIT_NUMERICAL,
        CascadeError::StageFailed { source, .. } => cascade_code(source),
        CascadeError::Gslda(g) => gslda_code(g),
        CascadeError::Ogslda(o) => ogslda_code(o),
        _ => EXIT_DATA,
    }
}

impl Error {
    /// 1 for usage errors, 2 for bad or insufficient data, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(IoError::Config(_)) => EXIT_USAGE,
            Error::Io(_) | Error::Weak(_) => EXIT_DATA,
            Error::Gslda(e) => gslda_code(e),
            Error::Ogslda(e) => ogslda_code(e),
            Error::Cascade(e) => cascade_code(e),
            Error::Linalg(_) => EXIT_NUMERICAL,
            Error::Threshold(e) => threshold_code(e),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(Error::from(IoError::Config("x".into())).exit_code(), 1);
        assert_eq!(Error::from(IoError::parse("f", "bad")).exit_code(), 2);
        assert_eq!(Error::from(GsldaError::EmptyClass).exit_code(), 2);
        assert_eq!(Error::from(GsldaError::SingularScatter).exit_code(), 3);
        assert_eq!(Error::from(OgsldaError::NonFinite).exit_code(), 3);
        let nested = CascadeError::StageFailed {
            stage: 2,
            source: Box::new(CascadeError::GoalUnreachable {
                learners: 1,
                detection_rate: 1.0,
                false_positive_rate: 1.0,
            }),
        };
        assert_eq!(Error::from(nested).exit_code(), 3);
        assert_eq!(Error::from(CascadeError::PoolExhausted).exit_code(), 2);
    }
}
