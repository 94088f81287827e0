use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("measure has no atoms")]
    EmptyMeasure,

    #[error("dataset has no measures")]
    EmptyDataset,

    #[error("negative weight {value} at atom {index}")]
    NegativeWeight { index: usize, value: f64 },

    #[error("weights sum to {sum}, expected 1")]
    WeightSum { sum: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("atom {index} has norm {norm}, outside the radius-1/2 ball")]
    OutsideBall { index: usize, norm: f64 },

    #[error("invalid parameter {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("{0}")]
    Invalid(&'static str),

    #[error("exact solver limited to {cap} atoms per side, got {atoms}")]
    OracleCapExceeded { atoms: usize, cap: usize },

    #[error("min-cost flow problem is infeasible")]
    Infeasible,

    #[error("min-cost flow problem is unbounded")]
    Unbounded,

    #[error("solver exceeded {0} iterations")]
    IterationLimit(usize),

    #[error("barycenter atom {atom} receives no mass")]
    EmptyAtom { atom: usize },

    #[error("all reconciled counts are zero")]
    AllCountsZero,

    #[error("privacy budget exhausted: charged share {num}/{den} exceeds 1")]
    BudgetExceeded { num: u64, den: u64 },

    #[error("ring {ring} has fewer than three distinct vertices")]
    DegenerateRing { ring: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
