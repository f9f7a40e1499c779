use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("variable {0} is unbounded in the zone")]
    UnboundedVariable(usize),

    #[error("empty input point set")]
    EmptyInput,

    #[error("tropical polyhedron has no generators")]
    EmptyGenerators,

    #[error("difference-bound matrix is not closed")]
    NotClosed,

    #[error("infinite DBM entry at ({0}, {1})")]
    InfiniteEntry(usize, usize),

    #[error("invalid interval [{0}, {1}]")]
    InvalidInterval(f64, f64),

    #[error("index {0} out of range")]
    BadIndex(usize),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("subdivision needs {cells} cells, budget is {budget}")]
    CellBudgetExceeded { cells: usize, budget: usize },

    #[error("abstraction became empty (internal soundness bug)")]
    EmptyAbstraction,

    #[error("feasible set is empty")]
    EmptyFeasibleSet,

    #[error("objective is unbounded below")]
    Unbounded,

    #[error("linear program failed: {0}")]
    Lp(String),


    #[error("assertion does not match network: {0}")]
    VariableMismatch(String),

    #[error("malformed network file: {0}")]
    MalformedFile(String),

    #[error("network file is empty")]
    EmptyFile,

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
