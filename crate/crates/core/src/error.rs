use num_bigint::BigUint;
use thiserror::Error;

/// Errors raised by the lattice, multiplier, field and maximal-norm routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Enumeration refused; the exact count is attached so callers can fall back to counting.
    #[error("enumeration cap exceeded in dimension {dim}: the ball holds {count} points")]
    CapExceeded { dim: usize, count: BigUint },

    #[error("work budget exceeded: {required} units requested, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("regime hypothesis violated: {0}")]
    RegimeViolation(String),

    #[error("ball of radius {radius} does not embed in a torus of side {side} (needs 2*floor(N)+1 <= M)")]
    Embedding { side: usize, radius: f64 },

    #[error("matrix {index} of the family is not hermitian (defect {defect:e})")]
    NonHermitian { index: usize, defect: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("localization window of half-width {half_width} does not fit a companion torus of side {side}")]
    WindowTooLarge { half_width: f64, side: usize },

    #[error("regimes leave dyadic radius {0} uncovered")]
    CoverageGap(u64),

    #[error("Monte Carlo budget too small: relative standard error {rel_stderr:.3e} exceeds 1%")]
    McBudget { rel_stderr: f64 },

    #[error("malformed field data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
