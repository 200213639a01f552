//! Crate-wide error type.
//!
//! Variants split into two families that the CLI maps to distinct exit
//! codes: configuration/validation errors (exit 2) and numerical failures
//! (exit 3). `Error::is_validation` encodes the split.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid dims {dims:?} invalid: every axis needs at least 4 sites")]
    DimsTooSmall { dims: [usize; 3] },

    #[error("box lengths {box_len:?} invalid: every axis must be positive and finite")]
    BadBox { box_len: [f64; 3] },

    #[error("fields live on different grids ({left} vs {right})")]
    GridMismatch { left: String, right: String },

    #[error(
        "semiclassical scale h = {h} unresolved on this grid: require h >= 4*max-spacing/pi = {required}"
    )]
    UnresolvedScale { h: f64, required: f64 },

    #[error("expression error: {0}")]
    Expression(String),

    #[error("cutoff support (radius {radius}) exceeds the box: need radius <= {max_radius}")]
    SupportExceedsBox { radius: f64, max_radius: f64 },

    #[error("partition scale gamma = {gamma} too small: require gamma >= 4*max-spacing = {min_gamma}")]
    GammaTooSmall { gamma: f64, min_gamma: f64 },

    #[error("gauge phase factor unresolved: spectral tail fraction {fraction:.3e} exceeds {limit:.1e}")]
    GaugeAliasing { fraction: f64, limit: f64 },

    #[error("eigensolver failed: {0}")]
    SolveFailed(String),

    #[error("iterative solver did not certify the spectrum below {threshold} within basis size {basis}")]
    NotConverged { threshold: f64, basis: usize },

    #[error("spectral result is flagged incomplete/unusable; trace functionals reject it")]
    IncompleteSpectrum,

    #[error("variational current has imaginary residue {got:.3e} (tolerance {tol:.1e}); eigenfunctions inconsistent")]
    ImaginaryResidue { got: f64, tol: f64 },

    #[error("energy shell {{ |xi|^2 = V + tau }} is empty over the sampling box")]
    EmptyShell,

    #[error("domain violation: {0}")]
    Domain(String),

    #[error("not enough data: need {need}, got {got}")]
    InsufficientData { need: usize, got: usize },

    #[error("config invalid:\n{}", .0.join("\n"))]
    InvalidConfig(Vec<String>),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("field file malformed: {0}")]
    FieldFormat(String),
}

impl Error {
    /// True for errors caused by bad inputs/configuration (CLI exit 2);
    /// false for numerical/runtime failures (CLI exit 3).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::DimsTooSmall { .. }
                | Error::BadBox { .. }
                | Error::GridMismatch { .. }
                | Error::UnresolvedScale { .. }
                | Error::Expression(_)
                | Error::SupportExceedsBox { .. }
                | Error::GammaTooSmall { .. }
                | Error::Domain(_)
                | Error::InsufficientData { .. }
                | Error::InvalidConfig(_)
                | Error::Json(_)
        )
    }
}
