//! Node features: kinematics of each (instrument, phase) unit summarized
//! into a fixed 14-entry vector.

mod kinematics;
mod scaler;
mod summary;

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::{ClipRecord, DatasetManifest};
use crate::{Error, Result};

pub use kinematics::{
    compute_kinematics, compute_unit_kinematics, KinematicSeries, UnitKinematics,
};
pub use scaler::FeatureScaler;
pub use summary::summarize_unit;

pub const FEATURE_COUNT: usize = 14;

/// Identifies the feature layout below; stored in every graph and checkpoint.
pub const FEATURE_SCHEMA_ID: &str = "kinematic-v1";

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "path_length",
    "mean_speed",
    "std_speed",
    "max_speed",
    "mean_accel_magnitude",
    "std_accel_magnitude",
    "mean_jerk_magnitude",
    "idle_fraction",
    "bbox_area",
    "duration_s",
    "visibility_fraction",
    "turning_rate_mean",
    "curvature_proxy",
    "motion_smoothness",
];

/// Position of a named feature in [`FEATURE_NAMES`].
///
/// Panics on unknown names.
pub fn feature_index(name: &str) -> usize {
    FEATURE_NAMES
        .iter()
        .position(|n| *n == name)
        .unwrap_or_else(|| panic!("unknown feature {name}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Speeds below this (units/s) count as idle.
    pub idle_threshold: f64,
    /// Longest hidden run (frames) that is interpolated instead of splitting.
    pub max_gap_frames: i64,
    /// Segments shorter than this are discarded.
    pub min_samples: usize,
    pub curvature_cap: f64,
    /// Added before taking the log of the bounding-box area/volume.
    pub bbox_epsilon: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            idle_threshold: 0.01,
            max_gap_frames: 5,
            min_samples: 4,
            curvature_cap: 10.0,
            bbox_epsilon: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatureVector {
    pub clip_id: String,
    pub instrument_id: String,
    pub phase_name: String,
    pub schema: String,
    pub features: Vec<f64>,
}

impl NodeFeatureVector {
    pub fn feature_names(&self) -> &'static [&'static str] {
        &FEATURE_NAMES
    }
}

/// Feature vectors for every (track, phase) unit of a clip. Units without
/// enough usable samples are skipped and reported in the returned warnings.
pub fn extract_clip(
    record: &ClipRecord,
    cfg: &FeatureConfig,
) -> Result<(Vec<NodeFeatureVector>, Vec<String>)> {
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    for track in &record.tracks {
        for phase in &record.phases {
            let kin = match compute_unit_kinematics(track, phase, cfg) {
                Ok(k) => k,
                Err(Error::InvalidInput(msg)) if msg.starts_with("track too short") => {
                    warnings.push(format!(
                        "{}/{}/{}: {msg}",
                        record.clip_id, track.instrument_id, phase.phase_name
                    ));
                    continue;
                }
                Err(e) => return Err(e),
            };
            let features = summarize_unit(&kin, cfg)?;
            out.push(NodeFeatureVector {
                clip_id: record.clip_id.clone(),
                instrument_id: track.instrument_id.clone(),
                phase_name: phase.phase_name.clone(),
                schema: FEATURE_SCHEMA_ID.into(),
                features: features.to_vec(),
            });
        }
    }
    Ok((out, warnings))
}

/// Runs [`extract_clip`] over every clip, in parallel, keeping clip order.
pub fn extract_dataset(
    manifest: &DatasetManifest,
    cfg: &FeatureConfig,
) -> Result<(Vec<NodeFeatureVector>, Vec<String>)> {
    use rayon::prelude::*;
    let per_clip: Vec<_> = manifest
        .clips
        .par_iter()
        .map(|c| extract_clip(&c.record, cfg))
        .collect::<Result<_>>()?;
    let mut vectors = Vec::new();
    let mut warnings = Vec::new();
    for (v, w) in per_clip {
        vectors.extend(v);
        warnings.extend(w);
    }
    Ok((vectors, warnings))
}

/// Writes the feature table: `clip_id,instrument_id,phase_name` followed by
/// one column per feature.
pub fn write_feature_table<W: Write>(writer: W, vectors: &[NodeFeatureVector]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let err = |e: csv::Error| Error::InvalidInput(format!("csv write failed: {e}"));
    let mut header = vec!["clip_id", "instrument_id", "phase_name"];
    header.extend(FEATURE_NAMES);
    wtr.write_record(&header).map_err(err)?;
    for v in vectors {
        let mut rec = vec![
            v.clip_id.clone(),
            v.instrument_id.clone(),
            v.phase_name.clone(),
        ];
        rec.extend(v.features.iter().map(|x| x.to_string()));
        wtr.write_record(&rec).map_err(err)?;
    }
    wtr.flush()
        .map_err(|e| Error::InvalidInput(format!("csv write failed: {e}")))
}

pub fn read_feature_table<R: Read>(reader: R, path: &Path) -> Result<Vec<NodeFeatureVector>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::schema(path, "header", e.to_string()))?
        .clone();
    let expected: Vec<&str> = ["clip_id", "instrument_id", "phase_name"]
        .into_iter()
        .chain(FEATURE_NAMES)
        .collect();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::SchemaMismatch {
            checkpoint: FEATURE_SCHEMA_ID.into(),
            dataset: format!(
                "feature table header `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Row {
            path: path.into(),
            row,
            message: e.to_string(),
        })?;
        let features = (3..3 + FEATURE_COUNT)
            .map(|k| {
                rec[k].parse::<f64>().map_err(|_| Error::Row {
                    path: path.into(),
                    row,
                    message: format!("cannot parse `{}` as {}", &rec[k], FEATURE_NAMES[k - 3]),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(NodeFeatureVector {
            clip_id: rec[0].to_string(),
            instrument_id: rec[1].to_string(),
            phase_name: rec[2].to_string(),
            schema: FEATURE_SCHEMA_ID.into(),
            features,
        });
    }
    Ok(out)
}
