//! Tracking-by-detection for overhead checkpoint cameras.
//!
//! The pipeline runs in stages, each usable on its own:
//!
//! - [`fusion`]: pool detections from rotated copies of each frame and keep
//!   one representative per mean-shift cluster.
//! - [`tracker`]: multiple-hypothesis tracking per camera and class.
//! - [`tracklets`]: stitch fragments within a camera, then hand identities
//!   across cameras through a homography.
//! - [`bagassoc`]: link each new bag to the nearest passenger.
//! - [`metrics`]: CLEAR-MOT and identity metrics against ground truth.
//!
//! [`scenario`] generates deterministic synthetic checkpoints with a mock
//! per-angle detector, and [`pipeline`] wires the stages to files.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use serde::{Deserialize, Serialize};

pub mod assignment;
pub mod bagassoc;
pub mod config;
pub mod error;
pub mod exec;
pub mod fusion;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod scenario;
pub mod tracker;
pub mod tracklets;

pub use error::{Error, Result};
pub use exec::Exec;
pub use geometry::{BBox, Homography, Point2, Polygon, Roi};

pub type FrameIdx = u32;
pub type CameraId = u32;
pub type Label = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectClass {
    Person,
    Bag,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 2] = [ObjectClass::Person, ObjectClass::Bag];

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectClass::Person => "person",
            ObjectClass::Bag => "bag",
        }
    }
}

impl std::fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ObjectClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "person" | "p" => Ok(ObjectClass::Person),
            "bag" | "b" => Ok(ObjectClass::Bag),
            other => Err(Error::param("class", format!("unknown class `{other}`"))),
        }
    }
}
