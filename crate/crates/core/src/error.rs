use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("joint {joint} angle {value} outside limits [{lo}, {hi}]")]
    JointLimitViolation {
        joint: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid robot geometry: {0}")]
    InvalidGeometry(String),

    #[error("bone vector {bone} has norm {norm}, expected unit length")]
    NonUnitBone { bone: usize, norm: f64 },

    #[error("bone {bone} is degenerate (length {length})")]
    DegenerateBone { bone: usize, length: f64 },

    #[error("value {value} outside domain {domain}")]
    DomainError { value: f64, domain: &'static str },

    #[error("waypoint {index} at distance {distance:.3} m is out of arm reach {reach:.3} m")]
    UnreachableWaypoint {
        index: usize,
        distance: f64,
        reach: f64,
    },

    #[error("trajectory {traj_id} has {frames} frames, at least {required} required")]
    InsufficientLength {
        traj_id: usize,
        frames: usize,
        required: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("at least 2 Monte Carlo samples are required, got {0}")]
    InsufficientSamples(usize),

    #[error("graph schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid planning request: {0}")]
    InvalidRequest(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
