use thiserror::Error;

/// Errors raised by the estimator, metrics and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LsmError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("lag underflow: {needed} leading samples required, {available} available")]
    LagUnderflow { needed: usize, available: usize },

    #[error("simulation diverged at t = {index}")]
    SimulationDiverged { index: usize },

    #[error("empty switching pattern")]
    EmptyPattern,

    #[error("invalid switching label {label} (expected 1..={modes})")]
    InvalidLabel { label: usize, modes: usize },

    #[error("{name} = {value} out of range [{lo}, {hi}]")]
    OutOfRange {
        name: &'static str,
        value: usize,
        lo: usize,
        hi: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("X not full row rank (rank {rank} < n = {n})")]
    NotFullRowRank { rank: usize, n: usize },

    #[error("exceeds combinatorial budget: {needed} evaluations requested, budget is {budget}; {advice}")]
    BudgetExceeded {
        needed: u128,
        budget: u128,
        advice: &'static str,
    },

    #[error("empty mode: LAD regression needs at least one sample")]
    EmptyMode,

    #[error("no valid pairs: every sampled pair had identical residual vectors")]
    NoValidPairs,

    #[error("infeasible tuple: s * nu = {required} exceeds N = {available}")]
    InfeasibleTuple { required: usize, available: usize },

    #[error("ground truth required but missing from the dataset")]
    MissingTruth,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("linear program failure: {0}")]
    Lp(String),
}

pub type Result<T> = std::result::Result<T, LsmError>;

impl LsmError {
    pub fn is_budget(&self) -> bool {
        matches!(self, LsmError::BudgetExceeded { .. })
    }
}
