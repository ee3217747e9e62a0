use std::fmt::Display;

/// A failure carrying the process exit code: 2 for bad usage or input, 1 for everything else.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub source: anyhow::Error,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn input(message: impl Display) -> Self {
        CliError {
            code: 2,
            source: anyhow::anyhow!("{message}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(source: anyhow::Error) -> Self {
        CliError { code: 1, source }
    }
}

impl From<oatune::Error> for CliError {
    fn from(e: oatune::Error) -> Self {
        CliError {
            code: 1,
            source: e.into(),
        }
    }
}

/// Marks the error of a fallible step as caused by user input.
pub trait InputContext<T> {
    fn input(self) -> CliResult<T>;
    fn input_with(self, what: impl Display) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> InputContext<T> for Result<T, E> {
    fn input(self) -> CliResult<T> {
        self.map_err(|e| CliError {
            code: 2,
            source: e.into(),
        })
    }

    fn input_with(self, what: impl Display) -> CliResult<T> {
        self.map_err(|e| CliError {
            code: 2,
            source: e.into().context(what.to_string()),
        })
    }
}
