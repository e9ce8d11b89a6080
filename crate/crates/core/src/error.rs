use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid camera calibration: {0}")]
    InvalidCalib(String),

    #[error("cost volume has wrong grid kind: expected {expected}, got {got}")]
    WrongVolumeKind { expected: &'static str, got: &'static str },

    #[error("point at sensor origin has no elevation angle")]
    OriginPoint,

    #[error("no jointly valid pixels")]
    NoValidPixels,

    #[error("correction requires at least one landmark")]
    NoLandmarks,

    #[error("calibration parse error: {0}")]
    CalibParse(String),

    #[error("malformed velodyne scan: {0}")]
    ScanParse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;
