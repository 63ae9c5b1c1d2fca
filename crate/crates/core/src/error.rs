use thiserror::Error;

use crate::field::FieldSpec;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("field mismatch: {left} vs {right}")]
    FieldMismatch { left: FieldSpec, right: FieldSpec },

    #[error("value {value} is not an element of {field}")]
    ValueOutOfRange { value: u32, field: FieldSpec },

    #[error("zero has no multiplicative inverse")]
    ZeroInverse,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("field too small: {0}")]
    FieldTooSmall(String),

    #[error("invalid message: {0}")]
    InvalidMessage(String),

    #[error("message matrix structure violated: {0}")]
    MalformedMessageMatrix(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid node id {node} (expected 1..={n})")]
    InvalidNode { node: usize, n: usize },

    #[error("invalid helper set: {0}")]
    InvalidHelpers(String),

    #[error("repair-by-transfer not admissible: {0}")]
    TransferNotAdmissible(String),

    #[error("missing content for node {0}")]
    MissingNode(usize),

    #[error("decoding needs {needed} distinct nodes, got {got}")]
    NotEnoughNodes { needed: usize, got: usize },

    #[error("duplicate node {0}")]
    DuplicateNode(usize),

    #[error("malformed node content: {0}")]
    MalformedContent(String),

    #[error("search budget exceeded: {needed} rank tests needed, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },

    #[error("no feasible transfer schedule: {0}")]
    NoFeasibleSchedule(String),

    #[error("workload error: {0}")]
    Workload(String),

    #[error("block format error: {0}")]
    BlockFormat(String),

    #[error("integrity check failed: {0}")]
    Integrity(String),
}
