use serde::Serialize;

use super::DatasetManifest;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub clip_id: Option<String>,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.clip_id {
            Some(id) => write!(f, "{id}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, clip_id: Option<&str>, message: impl Into<String>) {
        self.violations.push(Violation {
            clip_id: clip_id.map(str::to_string),
            message: message.into(),
        });
    }
}

/// Collects every invariant breach in a loaded dataset. Never fails; the
/// dataset is acceptable iff the report is empty.
pub fn validate_dataset(manifest: &DatasetManifest) -> ValidationReport {
    let mut report = ValidationReport::default();
    if manifest.categories.is_empty() {
        report.push(None, "no categories");
    }
    let scale = manifest.ordinal_scale;

    for record in manifest.records() {
        let id = Some(record.clip_id.as_str());
        if !manifest.split.contains_key(&record.clip_id) {
            report.push(id, "clip has no split");
        }
        if record.mode.dim() != record.tracks.first().map_or(record.mode.dim(), |t| t.dim) {
            report.push(id, "track dimensionality does not match clip mode");
        }
        if record.tracks.is_empty() {
            report.push(id, "no instrument tracks");
        }
        if record.phases.is_empty() {
            report.push(id, "no phases");
        }
        for p in &record.phases {
            if p.start_frame >= p.end_frame {
                report.push(id, format!("empty phase {}", p.phase_name));
            }
            if p.start_frame < 0 || p.end_frame > record.n_frames {
                report.push(
                    id,
                    format!("phase {} outside clip frame range", p.phase_name),
                );
            }
        }
        if record
            .phases
            .windows(2)
            .any(|w| w[1].start_frame < w[0].end_frame)
        {
            report.push(id, "phases overlap");
        }
        for track in &record.tracks {
            for v in track.violations() {
                report.push(id, format!("track {}: {v}", track.instrument_id));
            }
            if let Some((lo, hi)) = track.frame_range() {
                if lo < 0 || hi >= record.n_frames {
                    report.push(
                        id,
                        format!("track {} frames outside clip range", track.instrument_id),
                    );
                }
            }
        }
        for category in &manifest.categories {
            match record.labels.get(category) {
                None => report.push(id, format!("missing label for {category}")),
                Some(s) if !scale.contains(*s) => {
                    report.push(id, format!("label out of scale for {category}: {s}"))
                }
                _ => {}
            }
        }
    }
    for clip_id in manifest.split.keys() {
        if !manifest.clips.iter().any(|c| &c.record.clip_id == clip_id) {
            report.push(Some(clip_id), "split names an unknown clip");
        }
    }
    report
}
