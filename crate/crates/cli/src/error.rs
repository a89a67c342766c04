use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Config,
    Solver,
    Check,
    Io,
}

/// Failure of a run, serialized as the machine-readable error record.
#[derive(Clone, Debug, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        let code = match kind {
            ErrorKind::Config => 2,
            ErrorKind::Solver => 3,
            ErrorKind::Check => 4,
            ErrorKind::Io => 1,
        };
        Self { kind, code, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Config, message)
    }

    pub fn solver(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Solver, message)
    }

    pub fn check(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Check, message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Io, message)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("error record serializes")
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?} error: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<plastlab::Error> for CliError {
    fn from(e: plastlab::Error) -> Self {
        CliError::solver(e.to_string())
    }
}
