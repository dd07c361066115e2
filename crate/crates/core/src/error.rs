use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative or series computation failed to converge.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Fewer observations than unknowns.
    #[error("underdetermined system: {observations} observations for {unknowns} unknowns (need Q >= (N+1)^2)")]
    Underdetermined { observations: usize, unknowns: usize },

    /// A required spheroidal wave function table was not built.
    #[error("missing spheroidal wave function table for (m={m}, n={n})")]
    MissingTable { m: usize, n: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}

/// Tags errors with the pipeline stage that produced them.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
