use dagsobol_core::engine::EngineError;
use dagsobol_core::process::ProcessError;

pub const USAGE: u8 = 2;
pub const DATA: u8 = 3;
pub const NUMERICAL: u8 = 4;

/// An error with the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Failure {
            code: USAGE,
            error: anyhow::anyhow!(msg.into()),
        }
    }

    pub fn data(e: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: DATA,
            error: e.into(),
        }
    }

    pub fn numerical(e: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: NUMERICAL,
            error: e.into(),
        }
    }

    pub fn context(mut self, what: impl std::fmt::Display + Send + Sync + 'static) -> Self {
        self.error = self.error.context(what);
        self
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::InvalidConfig(_) => Failure {
                code: USAGE,
                error: e.into(),
            },
            e if e.is_numerical() => Failure::numerical(e),
            e => Failure::data(e),
        }
    }
}

impl From<ProcessError> for Failure {
    fn from(e: ProcessError) -> Self {
        match e {
            ProcessError::UnknownBuiltin(_) => Failure {
                code: USAGE,
                error: e.into(),
            },
            e => Failure::data(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::data(e)
    }
}
