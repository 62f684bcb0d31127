use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("kernel evaluated at non-positive time t = {0}")]
    NonPositiveTime(f64),

    #[error("quadrature did not converge: last estimate {last}, previous {previous}")]
    QuadratureNonConvergence { last: f64, previous: f64 },

    #[error("logarithm argument {argument} is not positive ({context})")]
    LogDomain {
        argument: f64,
        context: &'static str,
    },

    #[error("non-finite value at grid index {index} (x = {x}) at t = {t}")]
    NonFinite { index: usize, x: f64, t: f64 },

    #[error(
        "boundary contamination at t = {t}: max |phi| = {max_abs} on the outer 5% exceeds {tol}; \
         enlarge the half-width L"
    )]
    BoundaryContamination { t: f64, max_abs: f64, tol: f64 },

    #[error("CFL violation: {0}")]
    Cfl(String),

    #[error(
        "initial data outside small-amplitude regime: F(p) has no sign change on [{lo}, {hi}]"
    )]
    SmallAmplitudeRegime { lo: f64, hi: f64 },

    #[error("implicit ODE ill-conditioned: |1 - K| = {0} < 1/2")]
    IllConditioned(f64),

    #[error("sup over an empty sample set")]
    EmptySample,

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
