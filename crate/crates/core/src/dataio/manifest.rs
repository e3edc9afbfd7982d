//! Manifest and clip-record files.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::trajectories::{load_trajectories, write_trajectories};
use super::{ClipRecord, Mode, OrdinalScale, PhaseAnnotation, SkillClass, Split};
use crate::canonical::{to_canonical_string, write_json};
use crate::{Error, Result};

/// On-disk manifest schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    #[serde(default)]
    ordinal_scale: OrdinalScale,
    categories: Vec<String>,
    clips: Vec<String>,
    split: BTreeMap<String, Split>,
}

/// On-disk clip-record schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipFile {
    pub clip_id: String,
    pub mode: Mode,
    pub n_frames: i64,
    /// Trajectory CSV, relative to the clip file.
    pub trajectories: String,
    pub phases: Vec<PhaseAnnotation>,
    #[serde(default)]
    pub labels: BTreeMap<String, i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skill_class: Option<SkillClass>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipEntry {
    /// The reference exactly as written in the manifest.
    pub path: String,
    pub trajectories: String,
    pub record: ClipRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    /// Location of the manifest file; clip references resolve against its
    /// directory.
    pub path: PathBuf,
    pub ordinal_scale: OrdinalScale,
    pub categories: Vec<String>,
    /// Sorted by clip id.
    pub clips: Vec<ClipEntry>,
    pub split: BTreeMap<String, Split>,
}

impl DatasetManifest {
    pub fn base_dir(&self) -> &Path {
        self.path.parent().unwrap_or(Path::new("."))
    }

    pub fn records(&self) -> impl Iterator<Item = &ClipRecord> {
        self.clips.iter().map(|c| &c.record)
    }

    pub fn split_of(&self, clip_id: &str) -> Option<Split> {
        self.split.get(clip_id).copied()
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        Error::schema(path, field, e.into_inner().to_string())
    })
}

fn manifest_file_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join("manifest.json")
    } else {
        path.to_path_buf()
    }
}

/// Loads a manifest (a file, or a directory containing `manifest.json`)
/// together with every clip record and trajectory file it references.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let path = manifest_file_path(path);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let file: ManifestFile = parse_json(&path, &text)?;

    if file.categories.is_empty() {
        return Err(Error::schema(
            &path,
            "categories",
            "at least one category is required",
        ));
    }
    if file.ordinal_scale.min > file.ordinal_scale.max {
        return Err(Error::schema(&path, "ordinal_scale", "min exceeds max"));
    }

    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut clips = Vec::with_capacity(file.clips.len());
    for (k, reference) in file.clips.iter().enumerate() {
        let clip_path = base.join(reference);
        if !clip_path.is_file() {
            return Err(Error::schema(
                &path,
                format!("clips[{k}]"),
                format!(
                    "dangling clip reference: {} does not exist",
                    clip_path.display()
                ),
            ));
        }
        let (trajectories, record) = load_clip(&clip_path)?;
        for (category, score) in &record.labels {
            if !file.ordinal_scale.contains(*score) {
                return Err(Error::schema(
                    &clip_path,
                    format!("labels.{category}"),
                    format!(
                        "label out of scale: {score} not in [{}, {}]",
                        file.ordinal_scale.min, file.ordinal_scale.max
                    ),
                ));
            }
        }
        clips.push(ClipEntry {
            path: reference.clone(),
            trajectories,
            record,
        });
    }
    clips.sort_by(|a, b| a.record.clip_id.cmp(&b.record.clip_id));
    if let Some(w) = clips
        .windows(2)
        .find(|w| w[0].record.clip_id == w[1].record.clip_id)
    {
        return Err(Error::schema(
            &path,
            "clips",
            format!("duplicate clip id {}", w[0].record.clip_id),
        ));
    }

    let ids: BTreeSet<&str> = clips.iter().map(|c| c.record.clip_id.as_str()).collect();
    let split_ids: BTreeSet<&str> = file.split.keys().map(String::as_str).collect();
    if let Some(missing) = ids.difference(&split_ids).next() {
        return Err(Error::schema(
            &path,
            "split",
            format!("clip {missing} has no split"),
        ));
    }
    if let Some(extra) = split_ids.difference(&ids).next() {
        return Err(Error::schema(
            &path,
            format!("split.{extra}"),
            "split names a clip that is not listed",
        ));
    }

    Ok(DatasetManifest {
        path,
        ordinal_scale: file.ordinal_scale,
        categories: file.categories,
        clips,
        split: file.split,
    })
}

/// Loads one clip record and its trajectory CSV. Returns the trajectory
/// reference as written alongside the record.
pub fn load_clip(path: &Path) -> Result<(String, ClipRecord)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ClipFile = parse_json(path, &text)?;
    let csv_path = path
        .parent()
        .unwrap_or(Path::new("."))
        .join(&file.trajectories);
    if !csv_path.is_file() {
        return Err(Error::schema(
            path,
            "trajectories",
            format!("missing trajectory file {}", csv_path.display()),
        ));
    }
    let tracks = load_trajectories(&csv_path)?;
    if let Some(t) = tracks.iter().find(|t| t.clip_id != file.clip_id) {
        return Err(Error::schema(
            &csv_path,
            "clip_id",
            format!(
                "track {} belongs to clip {}, expected {}",
                t.instrument_id, t.clip_id, file.clip_id
            ),
        ));
    }
    let record = ClipRecord {
        clip_id: file.clip_id,
        mode: file.mode,
        n_frames: file.n_frames,
        tracks,
        phases: file.phases,
        labels: file.labels,
        skill_class: file.skill_class,
    };
    Ok((file.trajectories, record))
}

/// Writes the manifest file only (clip records are written by [`write_clip`]).
pub fn write_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    let file = ManifestFile {
        ordinal_scale: manifest.ordinal_scale,
        categories: manifest.categories.clone(),
        clips: manifest.clips.iter().map(|c| c.path.clone()).collect(),
        split: manifest.split.clone(),
    };
    write_json(path, &file)
}

/// Canonical manifest text, as [`write_manifest`] would write it.
pub fn manifest_to_string(manifest: &DatasetManifest) -> Result<String> {
    let file = ManifestFile {
        ordinal_scale: manifest.ordinal_scale,
        categories: manifest.categories.clone(),
        clips: manifest.clips.iter().map(|c| c.path.clone()).collect(),
        split: manifest.split.clone(),
    };
    to_canonical_string(&file).map_err(|e| Error::json(&manifest.path, e))
}

/// Writes `<dir>/<clip_id>.json` and `<dir>/<clip_id>.csv`; returns the clip
/// file path.
pub fn write_clip(dir: &Path, record: &ClipRecord) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_name = format!("{}.csv", record.clip_id);
    let csv_path = dir.join(&csv_name);
    let mut buf = Vec::new();
    write_trajectories(&mut buf, &record.tracks)?;
    fs::write(&csv_path, buf).map_err(|e| Error::io(&csv_path, e))?;

    let file = ClipFile {
        clip_id: record.clip_id.clone(),
        mode: record.mode,
        n_frames: record.n_frames,
        trajectories: csv_name,
        phases: record.phases.clone(),
        labels: record.labels.clone(),
        skill_class: record.skill_class,
    };
    let path = dir.join(format!("{}.json", record.clip_id));
    write_json(&path, &file)?;
    Ok(path)
}
