use crate::C64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("Verblunsky coefficient {value} is not in the open unit disk")]
    OutsideDisk { value: C64 },

    #[error("spectral parameter must be nonzero")]
    ZeroSpectralParameter,

    #[error("`{name}` must be even, got {value}")]
    NotEven { name: &'static str, value: i64 },

    #[error("invalid `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sequence period {period} does not divide {q}")]
    PeriodMismatch { period: usize, q: usize },

    #[error("matrix is not unitary (residual {residual:e})")]
    NotUnitary { residual: f64 },

    #[error("windows differ: {0}")]
    WindowMismatch(String),

    #[error("near-degenerate Floquet eigenvalues at k = {k} (gap {gap:e})")]
    NearDegenerate { k: f64, gap: f64 },

    #[error("point is not interior to a band: tr = {trace}")]
    NotInBand { trace: f64 },

    #[error("truncation unstable at dim {dim}: doubling changed the value by {change:e}")]
    TruncationUnstable { dim: usize, change: f64 },

    #[error("denominator {value:e} too close to zero")]
    SingularDenominator { value: f64 },

    #[error("tail of the sum criterion cannot be certified: {0}")]
    UncertifiedTail(String),

    #[error("coin at site {site}: {reason}")]
    Coin { site: i64, reason: String },

    #[error("walk window would exceed {limit} sites")]
    WindowOverflow { limit: usize },

    #[error("{0}")]
    Numerical(String),
}

impl Error {
    /// Errors caused by numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NearDegenerate { .. }
                | Error::TruncationUnstable { .. }
                | Error::SingularDenominator { .. }
                | Error::UncertifiedTail(_)
                | Error::WindowOverflow { .. }
                | Error::Numerical(_)
        )
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
