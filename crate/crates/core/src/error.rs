use thiserror::Error;

/// Every fallible operation in the crate reports through this type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("edge set contains a cycle through `{0}`")]
    Cycle(String),
    #[error("edge weights must be given for all edges or none")]
    PartialWeights,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("row {row}, column {col}: {msg}")]
    Csv { row: usize, col: usize, msg: String },
    #[error("variable sets differ: {0}")]
    VariableMismatch(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("entropy is undefined for an unqueried pair")]
    UndefinedEntropy,
    #[error("no queried pairs")]
    NoQueriedPairs,
    #[error("infeasible batch sizes: {0}")]
    InfeasibleSizes(String),
    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("expert call failed: {0}")]
    Expert(String),
    #[error("expert rejected credentials: {0}")]
    ExpertAuth(String),
    #[error("expert response could not be parsed: {0}")]
    ExpertParse(String),
    #[error("estimation: {0}")]
    Estimation(String),
    #[error("{0} DAG extensions exceed the cap of {1}; use a smaller graph")]
    TooManyExtensions(usize, usize),
    #[error("the graph has no acyclic DAG extension")]
    NoDagExtension,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for failures caused by something outside the process (the LM endpoint).
    pub fn is_external(&self) -> bool {
        matches!(self, Error::Expert(_) | Error::ExpertAuth(_) | Error::ExpertParse(_))
    }
}
