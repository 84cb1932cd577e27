use thiserror::Error;

/// Errors raised by the planning and verification routines.
///
/// Infeasible routes and unsatisfied tasks are data, not errors; they are
/// reported through `Option`/report types instead.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("self-loop on user {0}")]
    SelfLoop(usize),
    #[error("user index {index} out of range for {n_users} users")]
    UserOutOfRange { index: usize, n_users: usize },
    #[error("dimension mismatch: expected {expected} users, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("integer overflow while accumulating multiplicities")]
    Overflow,
    #[error("invalid user pair ({0}, {1})")]
    InvalidPair(usize, usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("unknown qubit {0}")]
    QubitNotFound(usize),
    #[error("qubit {helper} is not a neighbour of {qubit}")]
    InvalidHelper { qubit: usize, helper: usize },
    #[error("task is not a matching: user {0} appears twice")]
    NotAMatching(usize),
    #[error("invalid probability {0}")]
    InvalidProbability(f64),
    #[error("satellite pair ({0}, {1}) is not part of the task")]
    SedPairNotInTask(usize, usize),
    #[error("register too large: {qubits} qubits (limit {limit})")]
    TooLarge { qubits: usize, limit: usize },
    #[error("projection has zero norm")]
    ZeroNorm,
    #[error("schedule replay failed: {0}")]
    Replay(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
