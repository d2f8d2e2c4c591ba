use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {block}: expected {expected}, got {got}")]
    DimensionMismatch {
        block: String,
        expected: String,
        got: String,
    },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("matrix too large: {rows}x{cols}")]
    Size { rows: usize, cols: usize },
    #[error("A(theta) and Xi share an eigenvalue (smallest singular value {sigma_min:.3e})")]
    SharedEigenvalue { sigma_min: f64 },
    #[error(
        "m_x = {m_x} < m_xi = {m_xi}; reducing Xi to block-diagonal form is not supported"
    )]
    DimensionOrder { m_x: usize, m_xi: usize },
    #[error("I - P(theta) D_zv is singular at theta = {theta:?}")]
    IllPosed { theta: Vec<f64> },
    #[error("sI - A(theta) is singular")]
    SingularResolvent,
    #[error("case not applicable: {0}")]
    InapplicableCase(String),
    #[error("non-finite or divergent iterate at iteration {iter} (theta = {theta:?})")]
    NonFinite { iter: usize, theta: Vec<f64> },
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dims(block: &str, expected: (usize, usize), got: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            block: block.to_string(),
            expected: format!("{}x{}", expected.0, expected.1),
            got: format!("{}x{}", got.0, got.1),
        }
    }

    pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_)
                | Error::SharedEigenvalue { .. }
                | Error::IllPosed { .. }
                | Error::SingularResolvent
                | Error::NonFinite { .. }
        )
    }
}
