//! Process-level failure classes and their exit-code mapping.

use crate::config::ConfigError;

/// Exit code for configuration and input problems.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for failures during processing.
pub const EXIT_RUNTIME: i32 = 3;

/// Everything a command can fail with. Configuration and input
/// problems (bad keys, unreadable or malformed inputs, unknown ids,
/// checkpoint mismatches) exit 2; failures once processing has
/// started (training aborts, lock conflicts, artifact writes) exit 3.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{message}")]
    Input { message: String },
    #[error("{message}")]
    Runtime { message: String },
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self::Input {
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self::Runtime {
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Input { .. } => EXIT_CONFIG,
            Self::Runtime { .. } => EXIT_RUNTIME,
        }
    }
}
