//! Error type shared by the numeric core.

#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    /// A vector or parameter block had the wrong length.
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// A differentiable primitive produced a non-finite value.
    #[error("non-finite value produced by primitive `{op}`")]
    NonFinite { op: String },

    /// A condition index fell outside the embedding table.
    #[error("condition index {got} outside table of {vocab} rows (last row is the null token)")]
    UnknownCondition { got: usize, vocab: usize },

    /// Every reward in a group was equal, so advantages are identically zero.
    #[error("degenerate group: all {group_size} rewards equal, advantages are all zero")]
    DegenerateGroup { group_size: usize },

    /// A stored transition had zero (or negative) variance.
    #[error("zero-variance transition at step {step}: importance ratios are undefined")]
    ZeroVariance { step: usize },

    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Checkpoint serialization or deserialization failed.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

pub type CoreResult<T> = std::result::Result<T, CoreError>;

impl CoreError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CoreError::InvalidArgument(msg.into())
    }
}
