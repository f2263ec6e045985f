use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("ray with azimuth {azimuth} rad, elevation {elevation} rad runs parallel to the tube axis")]
    NoWallIntersection { azimuth: f64, elevation: f64 },

    #[error("invalid scene: {0}")]
    Geometry(String),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("time {time} s is outside the sampled range [{start}, {end}] s")]
    OutOfRange { time: f64, start: f64, end: f64 },

    #[error(transparent)]
    Config(#[from] crate::scenario::ConfigError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}
