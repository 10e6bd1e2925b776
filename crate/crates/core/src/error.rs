use std::fmt;

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("numeric input error: {0}")]
    NumericInput(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("empty loss: no positions selected by the mask")]
    EmptyLoss,
    #[error("index error: {0}")]
    Index(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("state error: {0}")]
    State(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("size error: {0}")]
    Size(String),
    #[error("length error: {0}")]
    Length(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("resource error: {0}")]
    Resource(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("training diverged at epoch {epoch}, batch {batch}: {message}")]
    Training {
        epoch: usize,
        batch: usize,
        message: String,
    },
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
    #[error("parse error at {location}: {message}")]
    Parse { location: Location, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Where in an input file a parse error happened.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub file: String,
    pub line: usize,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file, self.line)
    }
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NumericInput(_)
            | Error::Numeric(_)
            | Error::EmptyLoss
            | Error::Training { .. } => ErrorKind::Numeric,
            Error::Config(_) => ErrorKind::Usage,
            Error::Context { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }

    /// Wraps the error with a human-readable context such as a sequence id.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(file: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            location: Location {
                file: file.into(),
                line,
            },
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
