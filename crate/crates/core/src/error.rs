use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("mesh has no texture coordinates")]
    MissingUVs,
    #[error("image {path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("unknown segment {0}")]
    UnknownSegment(u32),
    #[error("{what} = {value} is outside [0, 1]")]
    Range { what: &'static str, value: f64 },
    #[error("no triangle received a label vote")]
    EmptyMask,
    #[error("k = {k} exceeds the {distinct} distinct covered colors")]
    KTooLarge { k: usize, distinct: usize },
    #[error("point ({x}, {y}, {z}) is outside the encoder domain")]
    OutOfBounds { x: f64, y: f64, z: f64 },
    #[error("no target normal map for view {0}")]
    MissingTargetView(usize),
    #[error("synthetic-reference oracle has no reference mesh")]
    ReferenceMeshAbsent,
    #[error("loss diverged in round {round} step {step}: {loss}")]
    DivergedLoss { round: usize, step: usize, loss: f64 },
    #[error("quadrature diverged for roughness {roughness}")]
    QuadratureDiverged { roughness: f64 },
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Numeric failures map to a different process exit status than input errors.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::DivergedLoss { .. } | Error::QuadratureDiverged { .. }
        )
    }
}
