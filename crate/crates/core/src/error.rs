use thiserror::Error;

use crate::subset::Subset;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column {0} of the design matrix is identically zero")]
    ZeroColumn(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension p = {0} exceeds the 64-column limit of bit-mask subsets")]
    DimensionTooLarge(usize),

    #[error("index {index} out of range for p = {p}")]
    IndexOutOfRange { index: usize, p: usize },

    #[error("state space of {states} states exceeds the enumeration cap of {cap}")]
    StateSpaceTooLarge { states: u128, cap: u128 },

    #[error("enumeration of {count} supports exceeds the cap of {cap}")]
    EnumerationTooLarge { count: u128, cap: u128 },

    #[error("column {0} is already active")]
    AlreadyActive(usize),

    #[error("column {0} is not active")]
    NotActive(usize),

    #[error("subsets are not disjoint")]
    NotDisjoint,

    #[error("lasso did not converge within {max_iter} sweeps (KKT residual {kkt_residual:.3e})")]
    NoConvergence {
        max_iter: usize,
        kkt_residual: f64,
        best: Vec<f64>,
    },

    #[error("the true support is the root of the path tree and has no parent")]
    RootHasNoParent,

    #[error("parent map has a cycle through state {0}")]
    CycleDetected(Subset),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by an enumeration or oracle size cap.
    pub fn is_resource_cap(&self) -> bool {
        matches!(
            self,
            Error::StateSpaceTooLarge { .. } | Error::EnumerationTooLarge { .. }
        )
    }
}
