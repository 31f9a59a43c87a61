use std::path::PathBuf;

use thiserror::Error;

/// Exit code for a configuration parse or validation error.
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NON_CONVERGENCE: i32 = 3;
pub const EXIT_INSTABILITY: i32 = 4;
pub const EXIT_IMAGINARY_FREQUENCY: i32 = 5;
pub const EXIT_TARGET_MISSED: i32 = 6;
pub const EXIT_VERIFY_FAILED: i32 = 7;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] ioncrystal::Error),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("no detuning reached infidelity below {target:e} (best {best})")]
    TargetMissed { target: f64, best: String },

    #[error("verification failed: {0}")]
    Verify(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use ioncrystal::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(e) => match e {
                E::InvalidConfig(_) => EXIT_CONFIG,
                E::NonConvergence { .. } | E::SelfConsistencyFailed { .. } | E::NoSettle { .. } => {
                    EXIT_NON_CONVERGENCE
                }
                E::UnstableRegion { .. } | E::ResonantDrive { .. } | E::Runaway { .. } => {
                    EXIT_INSTABILITY
                }
                E::ImaginaryFrequency { .. } => EXIT_IMAGINARY_FREQUENCY,
                _ => 1,
            },
            CliError::TargetMissed { .. } => EXIT_TARGET_MISSED,
            CliError::Verify(_) => EXIT_VERIFY_FAILED,
            CliError::Input(_) | CliError::Io { .. } => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
