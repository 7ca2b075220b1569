use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Library(#[from] potlab::Error),
    #[error("output: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// 2 for config errors (gauge violations included), 4 for budget guards,
    /// 3 for everything raised while computing.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Library(potlab::Error::GaugeViolation { .. }) => 2,
            CliError::Library(potlab::Error::BudgetExceeded { .. } | potlab::Error::TooManyAtoms { .. }) => 4,
            CliError::Library(_) | CliError::Output(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            4 => "budget",
            _ => "computation",
        }
    }
}
