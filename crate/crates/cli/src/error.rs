use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] trajloc::Error),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid override '{0}': {1}")]
    Override(String, String),

    #[error("missing input {0}; run `{1}` first")]
    MissingInput(PathBuf, &'static str),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        use trajloc::Error as E;
        match self {
            CliError::Core(e) => match e {
                E::Config(_) | E::EmptySelection(_) => 2,
                E::Io(_) | E::Csv(_) | E::Json(_) | E::Parse { .. } => 3,
                E::Divergence { .. } => 4,
                E::Shape(_) => 5,
                E::UndefinedCorrelation(_) => 1,
            },
            CliError::File { .. } | CliError::MissingInput(..) => 3,
            CliError::Override(..) => 2,
        }
    }
}

pub(crate) trait FileContext<T> {
    fn at(self, path: impl Into<PathBuf>) -> CliResult<T>;
}

impl<T> FileContext<T> for std::io::Result<T> {
    fn at(self, path: impl Into<PathBuf>) -> CliResult<T> {
        self.map_err(|source| CliError::File {
            path: path.into(),
            source,
        })
    }
}
