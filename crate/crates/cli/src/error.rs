use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const THRESHOLD: i32 = 4;
    pub const PROVENANCE: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("threshold check failed:\n{0}")]
    Threshold(String),

    #[error("stale or mixed provenance: {0}")]
    Provenance(String),

    #[error(transparent)]
    Core(#[from] dualnet::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use dualnet::Error as E;
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Data(_) => exit::DATA,
            CliError::Threshold(_) => exit::THRESHOLD,
            CliError::Provenance(_) => exit::PROVENANCE,
            CliError::Core(e) => match e {
                E::InvalidArgument(_) => exit::CONFIG,
                E::Format(_) | E::Truncated { .. } | E::Io { .. } => exit::DATA,
                E::Digest { .. } | E::Provenance(_) => exit::PROVENANCE,
                _ => exit::OTHER,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
