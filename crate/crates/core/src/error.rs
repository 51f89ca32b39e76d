use thiserror::Error;

pub type Result<T> = core::result::Result<T, CoreError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("shape mismatch: {what} (expected {expected}, got {actual})")]
    Shape {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("{what} index {index} out of range (limit {limit})")]
    Index {
        what: &'static str,
        index: usize,
        limit: usize,
    },
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error("{what} has {size} entries, above the cap of {cap}")]
    Size {
        what: &'static str,
        size: usize,
        cap: usize,
    },
    #[error("numeric error: {0}")]
    Numeric(&'static str),
    #[error("state {0} has no recorded action profile yet")]
    UninitializedState(usize),
    #[error("value iteration did not converge in {iterations} sweeps (last change {residual:e})")]
    IterationLimit { iterations: usize, residual: f64 },
    #[error("game violates {0} invariant(s)")]
    InvalidGame(usize),
}
