use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Runtime,
    Io,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("I/O error: {0}")]
    Stream(#[from] std::io::Error),
    #[error("parse error at line {line}: {reason}")]
    Parse { line: u64, reason: String },
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("empty graph: {0}")]
    EmptyGraph(String),
    #[error("token `{0}` appears both as a device and as an app")]
    NamespaceCollision(String),
    #[error("split error: {0}")]
    Split(String),
    #[error("index {index} out of range for {what} (size {size})")]
    Index {
        what: &'static str,
        index: usize,
        size: usize,
    },
    #[error("graph too large for dense recursion: {vertices} vertices > {limit}; use Monte Carlo estimation")]
    TooLarge { vertices: usize, limit: usize },
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),
    #[error("generation error: {0}")]
    Generation(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("sampling error: {0}")]
    Sampling(String),
    #[error("classifier error: {0}")]
    Classifier(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("metric error: {0}")]
    Metric(String),
    #[error("format error in {what}: {reason}")]
    Format { what: String, reason: String },
    #[error("lookup error: unknown {side} token `{token}`")]
    Lookup { side: &'static str, token: String },
    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(what: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Format {
            what: what.into(),
            reason: reason.into(),
        }
    }

    /// Wraps the error with the pipeline stage it came from.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } | Error::Stream(_) => ErrorKind::Io,
            Error::Parse { .. } | Error::Config { .. } | Error::Format { .. } => {
                ErrorKind::Validation
            }
            Error::Stage { source, .. } => source.kind(),
            _ => ErrorKind::Runtime,
        }
    }
}

/// Attaches a stage name to errors flowing out of a pipeline step.
pub trait StageExt<T> {
    fn stage(self, stage: &str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
