use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid volume: {0}")]
    InvalidVolume(String),

    #[error("site {0} is outside the volume")]
    SiteOutsideVolume(String),

    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("boundary condition does not cover shell site {0}")]
    MissingBoundarySite(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("region classification is not a partition of the volume: {0}")]
    RegionOverlap(String),

    #[error("no valid (M,a,r)-partition: {0}")]
    NoValidPartition(String),

    #[error("volume of {size} sites exceeds the exact-enumeration cap of {cap}")]
    VolumeTooLarge { size: usize, cap: usize },

    #[error("enumeration box too small: {0}")]
    BoxTooSmall(String),

    #[error("inconsistent computation: {0}")]
    Inconsistent(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
