use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Missing or unreadable input, or a store that cannot be parsed.
    #[error("{0}")]
    Input(String),
    #[error("config: {0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Config(_) => 2,
        }
    }

    pub fn input(context: impl std::fmt::Display, err: impl std::fmt::Display) -> CliError {
        CliError::Input(format!("{context}: {err}"))
    }
}

/// Warnings collected while a command ran. Any warning turns the exit
/// code into 3.
#[derive(Debug, Default)]
pub struct Warnings(pub Vec<String>);

impl Warnings {
    pub fn push(&mut self, msg: impl Into<String>) {
        self.0.push(msg.into());
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }
}
