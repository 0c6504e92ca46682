use thiserror::Error;

/// Errors raised by the estimators and their supporting routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("probability {0} is outside the open interval (0, 1)")]
    ProbabilityDomain(f64),

    #[error("correlation {0} is outside the admissible range")]
    CorrelationDomain(f64),

    #[error("invalid interval ({lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("interval ({lo}, {hi}] has probability mass below 1e-300")]
    DegenerateCell { lo: f64, hi: f64 },

    #[error("conditional cell ({row}, {col}) has vanishing probability mass")]
    DegenerateConditionalCell { row: usize, col: usize },

    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("need at least {need} observations, got {got}")]
    TooFewObservations { need: usize, got: usize },

    #[error("{axis} variable has {found} observed categories, at least 2 are required")]
    TooFewCategories { axis: &'static str, found: usize },

    #[error("{0} series is constant")]
    ConstantSeries(&'static str),

    #[error("{0} series contains a non-finite value")]
    NonFinite(&'static str),

    #[error("cumulative proportions must be strictly increasing and end at 1")]
    InvalidCumulative,

    #[error("category {0} is empty; collapse empty categories first")]
    EmptyCategory(usize),

    #[error("thresholds must be finite and strictly increasing")]
    InvalidThresholds,

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("expected a 2x2 table, got {rows}x{cols}")]
    NotTwoByTwo { rows: usize, cols: usize },

    #[error("nonpositive response variance {value} in category {category}")]
    NonpositiveVariance { category: usize, value: f64 },

    #[error("zero denominator in weighted least squares")]
    ZeroDenominator,

    #[error("response covariance is singular after ridge regularization")]
    SingularCovariance,

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
