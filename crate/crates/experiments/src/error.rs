use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Numerical(#[from] gridstates::Error),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("table: {0}")]
    Table(String),

    #[error("{failed} audit check(s) failed")]
    Audit { failed: usize },
}

impl CliError {
    /// Process exit status: 2 for configuration, 3 for numerical or I/O
    /// failures, 4 for a failed audit.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical(_) | Self::Io(_) | Self::Csv(_) | Self::Table(_) => 3,
            Self::Audit { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
