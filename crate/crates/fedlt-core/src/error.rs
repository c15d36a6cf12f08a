//! Error type shared by all simulation modules.

use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Operand shapes are incompatible.
    #[error("dimension error: {0}")]
    Dimension(String),
    /// A sparsity ratio would zero out an entire classifier column.
    #[error("degenerate mask: beta {beta} keeps {kept} of {dim} entries per column")]
    DegenerateMask { beta: f64, kept: usize, dim: usize },
    /// A classifier column has zero norm where a direction is required.
    #[error("degenerate vector: column {class} has zero norm")]
    DegenerateVector { class: usize },
    /// A long-tail profile rounded some class count down to zero.
    #[error("degenerate profile: class {class} has zero samples")]
    DegenerateProfile { class: usize },
    /// A head column has zero norm during realignment.
    #[error("degenerate head: class {class} has zero norm")]
    DegenerateHead { class: usize },
    /// A computation produced a non-finite value.
    #[error("numeric error at step {step}: {detail}")]
    Numeric { step: usize, detail: String },
    /// The federation protocol was driven with invalid inputs.
    #[error("protocol error: {0}")]
    Protocol(String),
    /// A sampling request exceeds the available pool.
    #[error("capacity error: {0}")]
    Capacity(String),
    /// Input data failed a consistency check.
    #[error("validation error: {0}")]
    Validation(String),
    /// A text record could not be parsed.
    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },
}

impl Error {
    pub(crate) fn dim(detail: impl Into<String>) -> Self {
        Error::Dimension(detail.into())
    }
}
