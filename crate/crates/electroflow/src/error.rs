use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("right-hand side is not balanced (sum {sum:.3e})")]
    UnbalancedDemand { sum: f64 },

    #[error("laplacian is singular (graph disconnected?)")]
    SingularLaplacian,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("random walk exceeded {cap} steps without hitting the target set")]
    WalkCapExceeded { cap: usize },

    #[error("resource budget exceeded: need {required}, have {available} ({what})")]
    Resource {
        what: String,
        required: usize,
        available: usize,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("rollback on empty journal")]
    EmptyJournal,

    #[error("edge budget exhausted ({touched} touched, budget {budget}); re-initialize the locator")]
    LocatorBudget { touched: usize, budget: usize },

    #[error("recentering did not converge after {iters} iterations (residual {residual:.3e})")]
    Centrality { iters: usize, residual: f64 },

    #[error("initialization failed: {0}")]
    Init(String),

    #[error("instance is infeasible")]
    Infeasible,

    #[error("rounding failed: {0}")]
    Rounding(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
