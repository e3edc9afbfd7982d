//! Dataset ingestion: manifests, clip records and trajectory CSVs.
//!
//! A dataset is a `manifest.json` that lists clip record files (one JSON per
//! clip) plus a train/val/test split. Each clip record points at a trajectory
//! CSV with header `clip_id,instrument_id,frame,t,x,y[,z],visible`.
//! All JSON is written with sorted keys, so a load/write round trip is
//! byte-identical.

mod manifest;
mod trajectories;
mod validate;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use manifest::{
    load_clip, load_manifest, manifest_to_string, write_clip, write_manifest, ClipEntry, ClipFile,
    DatasetManifest,
};
pub use trajectories::{load_trajectories, parse_trajectories, write_trajectories};
pub use validate::{validate_dataset, ValidationReport, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "2D")]
    TwoD,
    #[serde(rename = "3D")]
    ThreeD,
}

impl Mode {
    pub fn dim(self) -> usize {
        match self {
            Mode::TwoD => 2,
            Mode::ThreeD => 3,
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::TwoD => "2D",
            Mode::ThreeD => "3D",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "2D" => Ok(Mode::TwoD),
            "3D" => Ok(Mode::ThreeD),
            other => Err(format!("unknown mode `{other}` (expected 2D or 3D)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkillClass {
    Novice,
    Intermediate,
    Expert,
}

impl SkillClass {
    pub const ALL: [SkillClass; 3] = [
        SkillClass::Novice,
        SkillClass::Intermediate,
        SkillClass::Expert,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Inclusive range of ordinal label scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrdinalScale {
    pub min: i64,
    pub max: i64,
}

impl Default for OrdinalScale {
    fn default() -> Self {
        Self { min: 1, max: 5 }
    }
}

impl OrdinalScale {
    pub fn contains(&self, score: i64) -> bool {
        (self.min..=self.max).contains(&score)
    }

    /// Number of distinct scores, i.e. classes for a classifier head.
    pub fn len(&self) -> usize {
        (self.max - self.min + 1).max(0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn class_of(&self, score: i64) -> Option<usize> {
        self.contains(score).then(|| (score - self.min) as usize)
    }

    pub fn score_of(&self, class: usize) -> i64 {
        self.min + class as i64
    }

    /// Skill class by scale thirds: the lowest third is novice, the top third
    /// expert.
    pub fn tertile(&self, score: i64) -> SkillClass {
        let span = (self.max - self.min).max(1) as f64;
        let pos = (score - self.min) as f64 / span;
        if pos < 1.0 / 3.0 {
            SkillClass::Novice
        } else if pos < 2.0 / 3.0 {
            SkillClass::Intermediate
        } else {
            SkillClass::Expert
        }
    }
}

/// One observation of an instrument tip. `position` has `dim` meaningful
/// coordinates; unused ones are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub frame: i64,
    pub t: f64,
    pub position: [f64; 3],
    pub visible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentTrack {
    pub clip_id: String,
    pub instrument_id: String,
    pub dim: usize,
    pub samples: Vec<Sample>,
}

impl InstrumentTrack {
    pub fn frame_range(&self) -> Option<(i64, i64)> {
        Some((self.samples.first()?.frame, self.samples.last()?.frame))
    }

    /// Breaches of the track invariants, as human-readable messages.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.dim != 2 && self.dim != 3 {
            out.push(format!("dimensionality {} is not 2 or 3", self.dim));
        }
        for w in self.samples.windows(2) {
            if w[1].frame <= w[0].frame {
                out.push(format!(
                    "frames not strictly increasing at frame {}",
                    w[1].frame
                ));
                break;
            }
            if w[1].t < w[0].t {
                out.push(format!("time decreases at frame {}", w[1].frame));
                break;
            }
        }
        if let Some(s) = self
            .samples
            .iter()
            .find(|s| s.visible && s.position[..self.dim.min(3)].iter().any(|x| !x.is_finite()))
        {
            out.push(format!("non-finite visible position at frame {}", s.frame));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseAnnotation {
    pub phase_name: String,
    pub start_frame: i64,
    /// Exclusive.
    pub end_frame: i64,
}

impl PhaseAnnotation {
    pub fn contains(&self, frame: i64) -> bool {
        (self.start_frame..self.end_frame).contains(&frame)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipRecord {
    pub clip_id: String,
    pub mode: Mode,
    /// Frames are numbered `0..n_frames`.
    pub n_frames: i64,
    pub tracks: Vec<InstrumentTrack>,
    pub phases: Vec<PhaseAnnotation>,
    pub labels: BTreeMap<String, i64>,
    pub skill_class: Option<SkillClass>,
}

impl ClipRecord {
    /// The annotated class, or the tertile of the `Overall` score.
    pub fn effective_skill_class(&self, scale: &OrdinalScale) -> Option<SkillClass> {
        self.skill_class
            .or_else(|| self.labels.get("Overall").map(|s| scale.tertile(*s)))
    }

    pub fn phase_names(&self) -> Vec<String> {
        self.phases.iter().map(|p| p.phase_name.clone()).collect()
    }
}
