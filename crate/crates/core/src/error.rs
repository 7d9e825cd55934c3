use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// The variants line up with the command-line exit codes: configuration
/// problems exit with 2, missing inputs with 3, numerical failures with 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("quadrature did not converge: coarse = {coarse}, fine = {fine}, tolerance = {tol}")]
    Quadrature { coarse: f64, fine: f64, tol: f64 },

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {msg}")]
    Format { path: String, msg: String },
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Argument(_) => 2,
            Error::MissingInput(_) | Error::Format { .. } => 3,
            Error::Numeric(_) | Error::Quadrature { .. } => 4,
            Error::Io { .. } => 3,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
