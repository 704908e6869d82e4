use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const FAILURE: u8 = 1;
    /// Reserved by clap for usage errors.
    pub const USAGE: u8 = 2;
    pub const INFEASIBLE: u8 = 3;
    pub const INVALID_CONFIG: u8 = 4;
    pub const VERIFICATION_FAILED: u8 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("write failed: {0}")]
    Output(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Solver(#[from] optrec::Error),

    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use optrec::Error as E;
        match self {
            CliError::Config(_) => exit::INVALID_CONFIG,
            CliError::Verification(_) | CliError::Solver(E::FeasibilityMismatch { .. }) => {
                exit::VERIFICATION_FAILED
            }
            CliError::Solver(
                E::TooShort(_)
                | E::NonPositiveEntry { .. }
                | E::NegativeEntry { .. }
                | E::NonFiniteEntry { .. }
                | E::SumOutOfTolerance { .. }
                | E::LengthMismatch(..)
                | E::IndexOutOfRange { .. }
                | E::InvalidParameter { .. }
                | E::DimensionTooLarge { .. }
                | E::ResolutionTooCoarse(_)
                | E::InvalidArgument(_),
            ) => exit::INVALID_CONFIG,
            _ => exit::FAILURE,
        }
    }
}
