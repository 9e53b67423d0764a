use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] mpms_core::Error),
}

impl CliError {
    /// Category printed on stderr as `error[<category>]`.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
            CliError::Core(e) => e.category(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "usage" => 2,
            "config" => 3,
            "invalid-input" => 4,
            "corrupt-file" => 5,
            "io" => 6,
            "singular-geometry" => 7,
            "no-peak" => 8,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Attaches the file name to I/O failures from the core crate.
pub(crate) fn at(path: &std::path::Path) -> impl FnOnce(mpms_core::Error) -> CliError + '_ {
    move |e| match e {
        mpms_core::Error::Io(io) => CliError::Io(format!("{}: {io}", path.display())),
        other => CliError::Core(other),
    }
}
