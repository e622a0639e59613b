use thiserror::Error;

/// Errors produced by the geometry engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Expression text does not match the grammar. `offset` is a 1-based byte column.
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("variable x{index} at offset {offset} exceeds dimension {dim}")]
    VariableOutOfRange {
        index: usize,
        dim: usize,
        offset: usize,
    },

    /// An expression evaluated to NaN or an infinity.
    #[error("non-finite value while evaluating {context}")]
    NonFinite { context: String },

    #[error("metric is not positive definite at {point:?} (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite {
        point: Vec<f64>,
        min_eigenvalue: f64,
    },

    #[error("point {point:?} lies outside the chart domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite right-hand side at t = {t} (state {y:?})")]
    NonFiniteRhs { t: f64, y: Vec<f64> },

    #[error("adaptive step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    /// Integration left the chart (or the metric stopped being evaluable) at time `t`.
    #[error("integration left the chart at t = {t}: {source}")]
    ChartExit { t: f64, source: Box<Error> },

    #[error("frame drift {drift:e} exceeds bound {bound:e}")]
    Drift { drift: f64, bound: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("retry budget exhausted: {0}")]
    RetryBudget(String),
}

impl Error {
    /// True for failures of the numerical pipeline (as opposed to malformed input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::OutsideDomain { .. }
                | Error::Singular(_)
                | Error::NonFiniteRhs { .. }
                | Error::StepUnderflow { .. }
                | Error::ChartExit { .. }
                | Error::Drift { .. }
                | Error::Degenerate(_)
                | Error::RetryBudget(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
