//! Pipeline configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bagassoc::AssocConfig;
use crate::error::{Error, Result};
use crate::fusion::FusionConfig;
use crate::geometry::Homography;
use crate::io::load_homography;
use crate::scenario::ScenarioTruth;
use crate::tracker::TrackerParams;
use crate::tracklets::{HandoffConfig, StitchConfig};
use crate::{CameraId, ObjectClass};

/// Tracker parameters for each object class.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassParams {
    pub person: TrackerParams,
    pub bag: TrackerParams,
}

impl ClassParams {
    pub fn get(&self, cls: ObjectClass) -> &TrackerParams {
        match cls {
            ObjectClass::Person => &self.person,
            ObjectClass::Bag => &self.bag,
        }
    }
}

/// A homography given inline or as a file path, relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HomographyRef {
    Inline(Homography),
    Path(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraPair {
    pub primary: CameraId,
    pub auxiliary: CameraId,
    /// Maps auxiliary image points into the primary image.
    pub homography: HomographyRef,
    #[serde(default = "default_d_max")]
    pub d_max: f64,
}

fn default_d_max() -> f64 {
    30.0
}

fn default_iou_thr() -> f64 {
    0.4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub cameras: Vec<CameraId>,
    #[serde(default)]
    pub pairs: Vec<CameraPair>,
    #[serde(default)]
    pub fusion: FusionConfig,
    #[serde(default)]
    pub tracker: ClassParams,
    #[serde(default)]
    pub stitch: StitchConfig,
    #[serde(default)]
    pub assoc: AssocConfig,
    #[serde(default = "default_iou_thr")]
    pub iou_thr: f64,
}

/// Largest camera id; tracklet labels are namespaced by camera.
pub const MAX_CAMERA_ID: CameraId = 4000;

impl PipelineConfig {
    pub fn new(cameras: Vec<CameraId>) -> Self {
        Self {
            cameras,
            pairs: Vec::new(),
            fusion: FusionConfig::default(),
            tracker: ClassParams::default(),
            stitch: StitchConfig::default(),
            assoc: AssocConfig::default(),
            iou_thr: default_iou_thr(),
        }
    }

    /// Topology of a synthetic scene: its primary and auxiliary camera with
    /// the true homography inline.
    pub fn for_scenario(truth: &ScenarioTruth) -> Result<Self> {
        let [p, a] = truth.camera_ids();
        Ok(Self {
            pairs: vec![CameraPair {
                primary: p,
                auxiliary: a,
                homography: HomographyRef::Inline(truth.handoff_homography()?),
                d_max: default_d_max(),
            }],
            ..Self::new(vec![p, a])
        })
    }

    /// Read a config and load any homography files it references.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = crate::io::read_json(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Replace homography paths with the loaded matrices.
    pub fn resolve(&mut self, base: &Path) -> Result<()> {
        for pair in &mut self.pairs {
            if let HomographyRef::Path(p) = &pair.homography {
                let full = if p.is_absolute() { p.clone() } else { base.join(p) };
                pair.homography = HomographyRef::Inline(load_homography(&full)?);
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.fusion.validate()?;
        self.tracker.person.validate()?;
        self.tracker.bag.validate()?;
        self.stitch.validate()?;
        self.assoc.validate()?;
        if !(self.iou_thr > 0.0 && self.iou_thr <= 1.0) {
            return Err(Error::param("iou_thr", "must lie in (0, 1]"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &c in &self.cameras {
            if c >= MAX_CAMERA_ID {
                return Err(Error::param(
                    "cameras",
                    format!("camera id {c} must be below {MAX_CAMERA_ID}"),
                ));
            }
            if !seen.insert(c) {
                return Err(Error::param("cameras", format!("camera {c} listed twice")));
            }
        }
        for pair in &self.pairs {
            for c in [pair.primary, pair.auxiliary] {
                if !seen.contains(&c) {
                    return Err(Error::UnknownCamera(c));
                }
            }
            if pair.primary == pair.auxiliary {
                return Err(Error::param("pairs", "a camera cannot pair with itself"));
            }
            self.handoff(pair)?.validate()?;
        }
        Ok(())
    }

    /// Handoff settings of a pair; fails on an unresolved homography path.
    pub fn handoff(&self, pair: &CameraPair) -> Result<HandoffConfig> {
        match &pair.homography {
            HomographyRef::Inline(h) => Ok(HandoffConfig {
                d_max: pair.d_max,
                homography: *h,
            }),
            HomographyRef::Path(p) => Err(Error::param("homography", format!("{} was not loaded", p.display()))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_homographies_resolve_relative_to_config() {
        let dir = tempfile::tempdir().unwrap();
        crate::io::write_homography(&dir.path().join("h.json"), &Homography::translation(3.0, 4.0)).unwrap();
        let mut cfg = PipelineConfig::new(vec![1, 2]);
        cfg.pairs.push(CameraPair {
            primary: 1,
            auxiliary: 2,
            homography: HomographyRef::Path("h.json".into()),
            d_max: 30.0,
        });
        crate::io::write_json(&dir.path().join("cfg.json"), &cfg).unwrap();
        let loaded = PipelineConfig::load(&dir.path().join("cfg.json")).unwrap();
        assert_eq!(
            loaded.pairs[0].homography,
            HomographyRef::Inline(Homography::translation(3.0, 4.0))
        );
    }

    #[test]
    fn undefined_camera_is_rejected() {
        let mut cfg = PipelineConfig::new(vec![1]);
        cfg.pairs.push(CameraPair {
            primary: 1,
            auxiliary: 7,
            homography: HomographyRef::Inline(Homography::identity()),
            d_max: 30.0,
        });
        assert!(matches!(cfg.validate(), Err(Error::UnknownCamera(7))));
    }

    #[test]
    fn singular_inline_homography_is_rejected() {
        let text = r#"{"cameras":[1,2],"pairs":[{"primary":1,"auxiliary":2,"homography":[[1,2,3],[2,4,6],[0,0,1]]}]}"#;
        assert!(serde_json::from_str::<PipelineConfig>(text).is_err());
    }
}
