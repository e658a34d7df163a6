use thiserror::Error;

/// Everything that can go wrong inside the library.
///
/// Variants are grouped by [`ErrorKind`] so front ends can map them onto
/// exit codes without matching every case.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("matrix is not symplectic (residual {residual:.3e}, tolerance {tol:.1e})")]
    NotSymplectic { residual: f64, tol: f64 },
    #[error("non-finite entries in {0}")]
    NonFinite(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("{0} is not in the spectrum")]
    NotInSpectrum(String),
    #[error("eigenvalue {0} is not on the unit circle")]
    OffCircle(String),
    #[error("multiplicity error: {0}")]
    Multiplicity(String),
    #[error("eigenvalue {0} is diagonalizable; no nilpotent sign")]
    Diagonalizable(String),
    #[error("unsupported dimension 2n = {0} (classification needs 2n <= 4)")]
    UnsupportedDimension(usize),
    #[error("unsupported stratum: {0}")]
    UnsupportedStratum(String),
    #[error("time {t} outside [0, {total}]")]
    OutOfRange { t: f64, total: f64 },
    #[error("infeasible [{rule}]: {detail}")]
    Infeasible { rule: String, detail: String },
    #[error("degenerate Krein form on invariant subspace (smallest |eigenvalue| {0:.3e})")]
    DegenerateForm(f64),
    #[error("eigenvalue tracking ambiguous in time bracket [{t0}, {t1}]")]
    Tracking { t0: f64, t1: f64 },
    #[error("numerical failure: {what} (residual {residual:.3e})")]
    Numerical { what: String, residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    InvalidInput,
    Infeasible,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            Dimension(_) | NotSymplectic { .. } | NonFinite(_) | Invalid(_) | Precondition(_)
            | NotInSpectrum(_) | OffCircle(_) | Multiplicity(_) | Diagonalizable(_)
            | UnsupportedDimension(_) | UnsupportedStratum(_) | OutOfRange { .. } => {
                ErrorKind::InvalidInput
            }
            Infeasible { .. } => ErrorKind::Infeasible,
            Singular(_) | DegenerateForm(_) | Tracking { .. } | Numerical { .. } => {
                ErrorKind::Numerical
            }
        }
    }

    pub(crate) fn numerical(what: impl Into<String>, residual: f64) -> Self {
        Error::Numerical { what: what.into(), residual }
    }

    pub(crate) fn infeasible(rule: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Infeasible { rule: rule.into(), detail: detail.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
