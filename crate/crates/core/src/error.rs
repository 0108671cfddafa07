use thiserror::Error;

pub type Result<T, E = QqrError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum QqrError {
    /// An argument violated a documented shape or value contract.
    #[error("contract violation in {context}: {message}")]
    Contract {
        context: &'static str,
        message: String,
    },

    /// A dense assembly would exceed the configured memory cap.
    #[error(
        "not computed: predicted dense storage of {predicted} bytes exceeds the cap of {cap} bytes"
    )]
    SizeLimit { predicted: u128, cap: u128 },

    /// A pivot of the Kronecker-sum solve hit an eigenvalue-sum resonance.
    #[error("singular resonance: pivot magnitude {pivot:e} is below tolerance {tolerance:e}")]
    SingularResonance { pivot: f64, tolerance: f64 },

    #[error("matrix is singular to working precision ({context})")]
    Singular { context: &'static str },

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("Riccati equation has no stabilizing solution: {0}")]
    Unstabilizable(String),

    #[error("Riccati residual {residual:e} exceeds {tolerance:e} after refinement")]
    Accuracy { residual: f64, tolerance: f64 },

    #[error("parse error in field `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl QqrError {
    pub(crate) fn contract(context: &'static str, message: impl Into<String>) -> Self {
        QqrError::Contract {
            context,
            message: message.into(),
        }
    }

    pub(crate) fn parse(field: impl Into<String>, message: impl Into<String>) -> Self {
        QqrError::Parse {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for failures of the numerical algorithms themselves, as opposed to
    /// bad input, size refusals, or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            QqrError::SingularResonance { .. }
                | QqrError::Singular { .. }
                | QqrError::NoConvergence { .. }
                | QqrError::Unstabilizable(_)
                | QqrError::Accuracy { .. }
        )
    }
}
