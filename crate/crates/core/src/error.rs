use thiserror::Error;

/// Errors shared by the fidelity and privacy metrics.
#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("tables do not share a schema")]
    SchemaMismatch,
    #[error("distributions are over different domains")]
    DomainMismatch,
    #[error("table is empty")]
    EmptyTable,
    #[error("synthetic table is empty")]
    EmptySynthetic,
    #[error("real table is empty")]
    EmptyReal,
    #[error("input is empty")]
    EmptyInput,
    #[error("value lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least two columns, got {0}")]
    TooFewColumns(usize),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("quantile level {0} outside [0, 1]")]
    InvalidQuantile(f64),
}
