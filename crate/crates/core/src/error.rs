use crate::structure::{FinStructure, VertexId};
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),

    #[error("class mismatch: expected {expected}, got {found}")]
    ClassMismatch { expected: String, found: String },

    #[error("search bound exceeded: {0}")]
    SearchBoundExceeded(String),

    /// The ambient fragment is too shallow to answer: the closure of the
    /// queried set contains a pair whose true distance is not yet visible.
    /// `partial` holds the closure computed so far.
    #[error("completion depth insufficient: pair ({x}, {y}) is unresolved in this fragment")]
    DepthInsufficient {
        x: VertexId,
        y: VertexId,
        partial: Box<FinStructure>,
    },

    #[error("base must be nonempty for this independence relation")]
    EmptyBase,

    #[error("bases do not match: {0}")]
    BaseMismatch(String),

    #[error("a distance menu is required to enumerate metric extensions")]
    MenuRequired,

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("bad parameter: {0}")]
    BadParameter(String),

    #[error("internal invariant violated: {0}")]
    InternalInvariant(String),
}

/// A failed structure validity check. Total: `validate` never errors, it
/// either passes or names the first broken invariant with a witness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation(pub String);

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}
