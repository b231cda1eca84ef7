use std::io;

/// Errors raised anywhere in the repair pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("unknown relation `{0}`")]
    UnknownRelation(String),

    #[error("type error: {0}")]
    Type(String),

    #[error("invalid constraint or query: {0}")]
    Invalid(String),

    #[error("instances do not share the same key space: {0}")]
    KeySpaceMismatch(String),

    #[error("unsupported constraint: {0}")]
    UnsupportedConstraint(String),

    #[error("constraint set is not local: {0}")]
    NotLocal(String),

    #[error("constraint `{0}` is not a one-atom denial")]
    NotOneAtom(String),

    #[error("{what} exceeds the configured cap of {limit}")]
    CapExceeded { what: &'static str, limit: u64 },

    #[error("set cover instance is infeasible: element {0} is not covered by any set")]
    Infeasible(usize),

    #[error("invalid cover: {0}")]
    InvalidCover(String),

    #[error("no combined local fix resolves {0}")]
    NoCombinedFix(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no fix exists")]
    NoFix,

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit code used by the command-line front end and the C ABI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Syntax { .. }
            | Error::Schema(_)
            | Error::UnknownRelation(_)
            | Error::Type(_)
            | Error::Invalid(_)
            | Error::KeySpaceMismatch(_)
            | Error::Data(_)
            | Error::Io(_) => 2,
            Error::UnsupportedConstraint(_)
            | Error::NotLocal(_)
            | Error::NotOneAtom(_)
            | Error::Infeasible(_)
            | Error::InvalidCover(_)
            | Error::NoCombinedFix(_)
            | Error::Precondition(_) => 3,
            Error::CapExceeded { .. } => 4,
            Error::NoFix => 5,
        }
    }
}
