use std::collections::BTreeMap;

use super::{build_graph, EdgePolicy, GraphEntry, GraphIndex, GraphSet};
use crate::dataio::{DatasetManifest, Split};
use crate::features::{FeatureScaler, NodeFeatureVector, FEATURE_NAMES, FEATURE_SCHEMA_ID};
use crate::{Error, Result};

/// Standardizes node features with a scaler fitted on the training split and
/// builds one graph per clip. Clips without any feature vector are skipped
/// and reported as warnings.
pub fn build_graph_set(
    manifest: &DatasetManifest,
    vectors: &[NodeFeatureVector],
    policy: &EdgePolicy,
) -> Result<(GraphSet, FeatureScaler, Vec<String>)> {
    let mut by_clip: BTreeMap<&str, Vec<&NodeFeatureVector>> = BTreeMap::new();
    for v in vectors {
        if manifest.split_of(&v.clip_id).is_none() {
            return Err(Error::Validation(format!(
                "feature vector for unknown clip {}",
                v.clip_id
            )));
        }
        by_clip.entry(v.clip_id.as_str()).or_default().push(v);
    }

    let train_rows = vectors
        .iter()
        .filter(|v| manifest.split_of(&v.clip_id) == Some(Split::Train))
        .map(|v| v.features.as_slice());
    let scaler = FeatureScaler::fit(train_rows)?;

    let mut warnings = Vec::new();
    let mut graphs = Vec::new();
    let mut entries = Vec::new();
    for entry in &manifest.clips {
        let record = &entry.record;
        let Some(nodes) = by_clip.get(record.clip_id.as_str()) else {
            warnings.push(format!("{}: no usable units, clip skipped", record.clip_id));
            continue;
        };
        let scaled = nodes
            .iter()
            .map(|v| {
                Ok(NodeFeatureVector {
                    features: scaler.transform(&v.features)?,
                    ..(*v).clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut g = build_graph(&scaled, &record.phase_names(), policy)?;
        g.mode = record.mode;
        g.labels = record.labels.clone();
        entries.push(GraphEntry {
            clip_id: record.clip_id.clone(),
            split: manifest.split[&record.clip_id],
            path: format!("{}.json", record.clip_id),
        });
        graphs.push(g);
    }

    let index = GraphIndex {
        feature_schema: FEATURE_SCHEMA_ID.into(),
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        categories: manifest.categories.clone(),
        ordinal_scale: manifest.ordinal_scale,
        graphs: entries,
    };
    Ok((GraphSet { index, graphs }, scaler, warnings))
}
