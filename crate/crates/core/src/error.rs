use std::path::PathBuf;

use thiserror::Error;

use crate::{CameraId, FrameIdx};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate polygon: zero extent on at least one axis")]
    DegeneratePolygon,

    #[error("homography is singular (|det| = {det:e})")]
    SingularHomography { det: f64 },

    #[error("point ({x}, {y}) maps to the line at infinity")]
    PointAtInfinity { x: f64, y: f64 },

    #[error("detections mix frames or classes (expected frame {frame}, {detail})")]
    MixedDetections { frame: FrameIdx, detail: String },

    #[error("frames out of order: {next} follows {prev}")]
    OutOfOrder { prev: FrameIdx, next: FrameIdx },

    #[error("infeasible itinerary for object {object}: leg {leg} needs {speed:.2} px/frame, bound is {bound:.2}")]
    InfeasibleWaypoints {
        object: u32,
        leg: usize,
        speed: f64,
        bound: f64,
    },

    #[error("camera {0} is not defined")]
    UnknownCamera(CameraId),

    #[error("{path}:{line}: field `{field}`: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        field: String,
        message: String,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad user input (files, configs, parameters)
    /// rather than by an internal failure.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Stage { source, .. } => source.is_validation(),
            Error::Io { .. } => false,
            _ => true,
        }
    }
}
