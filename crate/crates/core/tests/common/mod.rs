#![allow(dead_code)]

use std::path::Path;

use surgnn::dataio::load_manifest;
use surgnn::features::{extract_dataset, FeatureConfig};
use surgnn::graph::{build_graph_set, EdgePolicy, GraphSet};
use surgnn::synth::{generate_dataset, SynthSpec};

/// A short-clip spec that keeps end-to-end tests fast.
pub fn small_spec(n_clips: usize, seed: u64) -> SynthSpec {
    SynthSpec {
        n_clips,
        frames_per_phase: 80,
        seed,
        ..Default::default()
    }
}

/// Generates `spec` under `dir` and runs it through feature extraction and
/// graph construction.
pub fn graph_set(spec: &SynthSpec, dir: &Path) -> GraphSet {
    let manifest = generate_dataset(spec, dir).unwrap();
    let manifest = load_manifest(&manifest.path).unwrap();
    let (vectors, _) = extract_dataset(&manifest, &FeatureConfig::default()).unwrap();
    let (set, _, _) = build_graph_set(&manifest, &vectors, &EdgePolicy::default()).unwrap();
    set
}
