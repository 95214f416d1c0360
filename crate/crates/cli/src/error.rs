use anb::data::DataError;
use anb::optim::OptimError;
use anb::proxysearch::ProxyError;
use anb::surrogate::SurrogateError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    /// Prefixes the message with the file it concerns.
    pub fn context(self, path: &std::path::Path) -> Self {
        let at = |m: String| format!("{}: {m}", path.display());
        match self {
            CliError::Config(m) => CliError::Config(at(m)),
            CliError::Input(m) => CliError::Input(at(m)),
            CliError::Infeasible(m) => CliError::Infeasible(at(m)),
            CliError::Io(m) => CliError::Io(at(m)),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            CliError::Io(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<SurrogateError> for CliError {
    fn from(e: SurrogateError) -> Self {
        match e {
            SurrogateError::Io(e) => CliError::Io(e.to_string()),
            SurrogateError::Config(m) => CliError::Config(m),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<ProxyError> for CliError {
    fn from(e: ProxyError) -> Self {
        match e {
            ProxyError::Infeasible { .. } => CliError::Infeasible(e.to_string()),
            ProxyError::Oracle(_) | ProxyError::Metric(_) => CliError::Input(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<OptimError> for CliError {
    fn from(e: OptimError) -> Self {
        match e {
            OptimError::Config(m) => CliError::Config(m),
            other => CliError::Input(other.to_string()),
        }
    }
}
