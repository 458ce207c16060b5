use thiserror::Error;

/// Failures of a subcommand, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at line {line}: {msg}")]
    Syntax { line: usize, msg: String },

    #[error("config error at `{key}`{}: {msg}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Key {
        key: String,
        line: Option<usize>,
        msg: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("assertion failed: {0}")]
    Assertion(String),
}

impl CliError {
    pub fn syntax(line: usize, msg: String) -> Self {
        Self::Syntax { line, msg }
    }

    pub fn key(key: &str, line: Option<usize>, msg: String) -> Self {
        Self::Key {
            key: key.to_string(),
            line,
            msg,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Syntax { .. } | Self::Key { .. } | Self::Config(_) | Self::Io(_) => 1,
            Self::Numerical(_) => 2,
            Self::Assertion(_) => 3,
        }
    }
}

impl From<plap_core::Error> for CliError {
    fn from(e: plap_core::Error) -> Self {
        use plap_core::Error as E;
        match e {
            E::InvalidParameter { .. }
            | E::InvalidDomain(_)
            | E::DomainMismatch
            | E::OutOfDomain(_) => Self::Config(e.to_string()),
            _ => Self::Numerical(e.to_string()),
        }
    }
}
