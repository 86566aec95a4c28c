use thiserror::Error;

/// Everything that can go wrong while setting up or solving a problem.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("interval ordering violated: need a < c1 < c2 < b, got a={a}, c1={c1}, c2={c2}, b={b}")]
    Ordering { a: f64, c1: f64, c2: f64, b: f64 },

    #[error("transmission scalar `{name}` must be nonzero")]
    ZeroScalar { name: &'static str },

    #[error("field `{field}` is not finite ({value})")]
    NonFinite { field: String, value: f64 },

    #[error("potential must have exactly 3 pieces with degree <= {max_degree}: {detail}")]
    PieceDomain { max_degree: usize, detail: String },

    #[error("x = {x} lies outside [{lo}, {hi}]")]
    Domain { x: f64, lo: f64, hi: f64 },

    #[error("integrator could not meet tolerance at x = {x} (lambda = {lambda})")]
    ToleranceFailure { x: f64, lambda: f64 },

    #[error("solution magnitude exceeded the overflow guard at x = {x}; rescale and continue")]
    OverflowGuard { x: f64 },

    #[error("state is at x = {x}, expected the interface at {expected}")]
    Position { x: f64, expected: f64 },

    #[error("asymptotic expansion requires s >= 1, got s = {s}")]
    SmallS { s: f64 },

    #[error("eigenvalue index must be non-negative, got {n}")]
    Index { n: i64 },

    #[error("invalid range: {detail}")]
    Range { detail: String },

    #[error("scan refinement budget exhausted: {brackets} sign changes vs {counted} by phase count on [{lambda_min}, {lambda_max}]")]
    BudgetExceeded {
        lambda_min: f64,
        lambda_max: f64,
        brackets: usize,
        counted: usize,
    },

    #[error("no sign change of the characteristic function on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("records are not consecutive from index 0 (gap at position {position}, found n = {found})")]
    IndexGap { position: usize, found: usize },

    #[error("tail fit failed: {detail}")]
    FitFailure { detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;
