use std::fmt;

/// Terminal outcome of a command other than success, mapped onto exit codes.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    /// Exit 2.
    Config(String),
    /// Exit 3: blow-up criterion requested but not satisfied.
    Criterion(String),
    /// Exit 4.
    Io(String),
    /// Exit 1: a check or solve did not meet its tolerance.
    Check(String),
    /// Exit 1.
    Internal(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Criterion(_) => 3,
            Failure::Io(_) => 4,
            Failure::Check(_) | Failure::Internal(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Failure::Config(_) => "config",
            Failure::Criterion(_) => "criterion_unsatisfied",
            Failure::Io(_) => "io",
            Failure::Check(_) => "check_failed",
            Failure::Internal(_) => "internal",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Criterion(m) | Failure::Io(m) | Failure::Check(m) | Failure::Internal(m) => m,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind(), self.message())
    }
}

impl std::error::Error for Failure {}

impl From<dslab::Error> for Failure {
    fn from(e: dslab::Error) -> Self {
        use dslab::Error as E;
        match e {
            E::InvalidGrid(_) | E::InvalidParams(_) | E::Config(_) => Failure::Config(e.to_string()),
            E::Io(_) | E::Format(_) => Failure::Io(e.to_string()),
            E::CertificationFailed(_) => Failure::Check(e.to_string()),
            _ => Failure::Internal(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Internal(e.to_string())
    }
}
