use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("strip not well defined: c*eps = {width} must be < 1/2")]
    StripNotWellDefined { width: f64 },

    #[error("strip unresolved: {cells} cells inside the strip of width {width}, need at least {required}")]
    UnresolvedStrip {
        width: f64,
        cells: usize,
        required: usize,
    },

    #[error("vacuum breach at t = {time} (dt = {dt}): density {rho} in cell ({i}, {j})")]
    VacuumBreach {
        time: f64,
        dt: f64,
        rho: f64,
        i: usize,
        j: usize,
    },

    #[error("non-finite state at t = {time} (dt = {dt})")]
    NonFinite { time: f64, dt: f64 },

    #[error("no valid samples: {0}")]
    NoValidSamples(&'static str),

    #[error("too few points for a fit: {have} usable, need {need}")]
    TooFewPoints { have: usize, need: usize },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("malformed snapshot {path}: {reason}")]
    Snapshot { path: PathBuf, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
