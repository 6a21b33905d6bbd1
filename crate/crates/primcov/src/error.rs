//! Crate-wide error type.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse mesh {path}: {reason}")]
    MeshParse { path: PathBuf, reason: String },

    #[error("mesh contains no usable triangles")]
    EmptyMesh,

    #[error("voxel grid would hold {requested} voxels, above the limit of {limit}")]
    GridTooLarge { requested: usize, limit: usize },

    #[error("voxel resolution mismatch: {0} vs {1}")]
    ResolutionMismatch(f64, f64),

    #[error("voxel grids are not aligned to a common lattice")]
    GridMisaligned,

    #[error("sampling region is empty (safety distance too close to viewing range at this resolution)")]
    EmptySamplingRegion,

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("interpolated viewing direction degenerates (endpoint directions near antipodal)")]
    AntipodalDirections,

    #[error("coverage target {target:.4} unreachable, maximum achievable is {max:.4}")]
    UnreachableCoverage { target: f64, max: f64 },

    #[error("graph is disconnected: {0}")]
    Disconnected(String),

    #[error("search exceeded the iteration cap of {0}")]
    IterationCap(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("mesh hash mismatch: expected {expected}, got {actual}")]
    HashMismatch { expected: String, actual: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed {what}: {reason}")]
    MalformedArtifact { what: String, reason: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
