//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures raised by data handling, set learning, reformulation and solving.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("infeasible calibration: n2 = {n2} is below the required minimum {required}")]
    InfeasibleCalibration { n2: usize, required: usize },
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("degenerate polytope: {0}")]
    DegeneratePolytope(String),
    #[error("degenerate shape: {0}")]
    DegenerateShape(String),
    #[error("cluster {cluster} ended with {size} point(s); try fewer than {k} clusters")]
    ClusterDegeneracy {
        cluster: usize,
        size: usize,
        k: usize,
    },
    #[error("grid too fine: {boxes} boxes exceed the limit of {limit}")]
    TooFineGrid { boxes: f64, limit: usize },
    #[error("unsupported combination: {family} with {shape}; supported pairs: {supported}")]
    UnsupportedCombination {
        family: String,
        shape: String,
        supported: String,
    },
    #[error("invalid scale: {0}")]
    InvalidScale(String),
    #[error("program contains PSD cones and can only be exported")]
    ExportOnly,
    #[error("unsupported export: {0}")]
    UnsupportedExport(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::InfeasibleCalibration { .. } => "infeasible-calibration",
            Error::DegenerateData(_) => "degenerate-data",
            Error::DegeneratePolytope(_) => "degenerate-polytope",
            Error::DegenerateShape(_) => "degenerate-shape",
            Error::ClusterDegeneracy { .. } => "cluster-degeneracy",
            Error::TooFineGrid { .. } => "too-fine-grid",
            Error::UnsupportedCombination { .. } => "unsupported-combination",
            Error::InvalidScale(_) => "invalid-scale",
            Error::ExportOnly => "export-only",
            Error::UnsupportedExport(_) => "unsupported-export",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
