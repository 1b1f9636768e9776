use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed weight specification; `position` is a byte offset into the
    /// whole spec (into the bare expression when parsed directly).
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("weight evaluation failed at t = {t}: {message}")]
    WeightEval { t: f64, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature failed on [{lo}, {hi}]: {message}")]
    Quadrature { lo: f64, hi: f64, message: String },

    #[error("profile solve for lambda = {lambda} did not converge: est_error {est_error:e} > tol {tol:e}")]
    NoConvergence { lambda: f64, est_error: f64, tol: f64 },

    #[error("symbol table does not cover lambda = {lambda} (max tabulated {max}); extrapolation disabled")]
    ExtrapolationDisabled { lambda: f64, max: f64 },

    #[error("no profile available for lambda = {0}")]
    MissingProfile(f64),

    #[error("t level {t} exceeds the profile truncation {t_max}")]
    BeyondTruncation { t: f64, t_max: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("kernel tail mass {tail:e} exceeds tolerance {tol:e}")]
    KernelTail { tail: f64, tol: f64 },

    #[error("energy tail estimate {tail:e} exceeds tolerance {tol:e}")]
    EnergyTail { tail: f64, tol: f64 },

    #[error("degenerate field: {0}")]
    Degenerate(String),

    #[error("field is not monotone in x2: {fraction:.3e} of unmasked points have d2U < 0")]
    NotMonotone { fraction: f64 },

    #[error("half-annulus for R = {radius} leaves the grid ({outside_fraction:.3e} of its volume is outside)")]
    AnnulusOutsideGrid { radius: f64, outside_fraction: f64 },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Stable short identifier for scripts and reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::InvalidWeight(_) => "invalid_weight",
            Error::WeightEval { .. } => "weight_eval",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Quadrature { .. } => "quadrature",
            Error::NoConvergence { .. } => "no_convergence",
            Error::ExtrapolationDisabled { .. } => "extrapolation_disabled",
            Error::MissingProfile(_) => "missing_profile",
            Error::BeyondTruncation { .. } => "beyond_truncation",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::KernelTail { .. } => "kernel_tail",
            Error::EnergyTail { .. } => "energy_tail",
            Error::Degenerate(_) => "degenerate",
            Error::NotMonotone { .. } => "not_monotone",
            Error::AnnulusOutsideGrid { .. } => "annulus_outside_grid",
            Error::Io(_) => "io",
            Error::Format(_) => "format",
        }
    }

    /// True for errors caused by the caller's input rather than by the
    /// numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::InvalidWeight(_) | Error::InvalidArgument(_) | Error::Io(_) | Error::Format(_)
        )
    }
}
