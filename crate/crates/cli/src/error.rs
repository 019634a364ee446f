use std::path::PathBuf;

use specfun_core::Error as CoreError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_INVARIANT: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    ConfigParse(String),
    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("{origin}: expected {expected} values, found {found}")]
    CountMismatch {
        origin: String,
        expected: usize,
        found: usize,
    },
    #[error("{origin}: non-finite value at position {index}")]
    NonFiniteValue { origin: String, index: usize },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::ConfigParse(_) | Self::MissingFile(_) | Self::CountMismatch { .. } | Self::NonFiniteValue { .. } => {
                EXIT_CONFIG
            }
            Self::Invariant(_) => EXIT_INVARIANT,
            Self::Io(_) => EXIT_NUMERIC,
            Self::Core(e) => match e {
                CoreError::InvalidParameter(_)
                | CoreError::ShapeMismatch(_)
                | CoreError::DimensionMismatch { .. }
                | CoreError::UnsupportedDimension(_)
                | CoreError::InvalidExponent(_)
                | CoreError::NoPoincare
                | CoreError::RadiusTooSmall { .. } => EXIT_CONFIG,
                CoreError::LipschitzViolated { .. }
                | CoreError::LowerBoundViolated { .. }
                | CoreError::BoundViolated { .. }
                | CoreError::NonContraction { .. }
                | CoreError::BallEscape { .. }
                | CoreError::MonotonicityViolated { .. }
                | CoreError::SolutionBoundViolated { .. } => EXIT_INVARIANT,
                _ => EXIT_NUMERIC,
            },
        }
    }
}
