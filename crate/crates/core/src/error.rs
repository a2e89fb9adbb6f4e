use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {op} got {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize, usize),
        right: (usize, usize, usize),
    },

    #[error("invalid dimensions: {0}")]
    Dimensions(String),

    #[error("non-real inverse: imaginary residue {residue:e} exceeds tolerance")]
    NonRealInverse { residue: f64 },

    #[error("oracle too large: D*max(H,L) = {size} exceeds {limit}")]
    OracleTooLarge { size: usize, limit: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("not in generated submodule: least-squares residual {residual:e} exceeds {tol:e}")]
    NotInSubmodule { residual: f64, tol: f64 },

    #[error("generation error: {0}")]
    Generation(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn shape(
        op: &'static str,
        left: (usize, usize, usize),
        right: (usize, usize, usize),
    ) -> Self {
        Error::Shape { op, left, right }
    }

    pub(crate) fn format(offset: usize, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }

    /// Errors caused by bad or unreadable input data, as opposed to bad parameters.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Data(_)
                | Error::Format { .. }
                | Error::Io(_)
                | Error::NonRealInverse { .. }
                | Error::Generation(_)
                | Error::NotInSubmodule { .. }
        )
    }
}
