use std::fmt;

use thiserror::Error;

/// Mandatory and informational predicates checked when a model is validated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateName {
    Antisymmetric,
    Jacobi,
    VerticalSubalgebra,
    BundleLike,
    BracketGenerating,
    MinimalLeaves,
    TotallyGeodesic,
    Carnot,
}

impl fmt::Display for CertificateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CertificateName::Antisymmetric => "antisymmetric",
            CertificateName::Jacobi => "jacobi",
            CertificateName::VerticalSubalgebra => "vertical_subalgebra",
            CertificateName::BundleLike => "bundle_like",
            CertificateName::BracketGenerating => "bracket_generating",
            CertificateName::MinimalLeaves => "minimal_leaves",
            CertificateName::TotallyGeodesic => "totally_geodesic",
            CertificateName::Carnot => "carnot",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed model: {0}")]
    Malformed(String),

    /// Witness indices are 1-based basis indices, matching the model file.
    #[error("ValidationFailure({certificate}, witness = {witness:?})")]
    ValidationFailure {
        certificate: CertificateName,
        witness: [usize; 3],
    },

    #[error("canonical variation needs eps > 0, got {0}")]
    NonPositiveEpsilon(f64),

    #[error("model is not totally geodesic (C does not vanish)")]
    NotTotallyGeodesic,

    #[error("no group law available for model '{0}' (needs a nilpotent algebra or su(2))")]
    UnsupportedGroup(String),

    #[error("geodesic integration failed: {0}")]
    IntegrationFailure(String),

    #[error("shooting solver did not converge (best residual {residual:e})")]
    NoConvergence { residual: f64 },

    #[error("skewed transport needs a horizontal input vector")]
    NonHorizontalInput,

    #[error("horizontal index form needs a horizontal field (vertical part {0:e})")]
    NonHorizontalField(f64),

    #[error("outside the comparison domain: {0}")]
    DomainError(String),

    #[error("distance between the requested points is not certified")]
    UncertifiedDistance,

    #[error("audit needs K > 0, model has K = {0}")]
    NonPositiveK(f64),

    #[error("run needs K <= 0, model has K = {0}")]
    InapplicableK(f64),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
