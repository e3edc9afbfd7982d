use surgnn::dataio::{load_manifest, Split};
use surgnn::features::{
    extract_dataset, read_feature_table, write_feature_table, FeatureConfig, FEATURE_COUNT,
};
use surgnn::graph::{
    build_graph_set, load_graph_set, save_graph_set, EdgePolicy, LaplacianDecomposition,
    LaplacianKind,
};
use surgnn::synth::generate_dataset;

mod common;

#[test]
fn generated_data_flows_through_features_and_graphs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = common::small_spec(30, 11);
    generate_dataset(&spec, &dir.path().join("data")).unwrap();
    let manifest = load_manifest(&dir.path().join("data")).unwrap();
    assert_eq!(manifest.clips.len(), 30);

    let (vectors, warnings) = extract_dataset(&manifest, &FeatureConfig::default()).unwrap();
    assert!(warnings.is_empty(), "{warnings:?}");
    assert_eq!(vectors.len(), 30 * 4);
    assert!(vectors
        .iter()
        .all(|v| v.features.len() == FEATURE_COUNT && v.features.iter().all(|x| x.is_finite())));

    let mut csv = Vec::new();
    write_feature_table(&mut csv, &vectors).unwrap();
    let back = read_feature_table(csv.as_slice(), std::path::Path::new("features.csv")).unwrap();
    assert_eq!(back, vectors);

    let (set, scaler, _) = build_graph_set(&manifest, &back, &EdgePolicy::default()).unwrap();
    assert_eq!(set.graphs.len(), 30);
    assert_eq!(
        set.index
            .graphs
            .iter()
            .filter(|e| e.split == Split::Train)
            .count(),
        21
    );

    // Training-split node features are standardized by the fitted scaler.
    let train = set.split(Split::Train);
    for k in 0..FEATURE_COUNT {
        if scaler.constant[k] {
            continue;
        }
        let col: Vec<f64> = train
            .iter()
            .flat_map(|g| g.features.column(k).to_vec())
            .collect();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        assert!(mean.abs() <= 1e-9, "feature {k} mean {mean}");
    }

    for g in &set.graphs {
        g.validate().unwrap();
        assert_eq!(g.len(), 4);
        let d = LaplacianDecomposition::new(&g.adjacency, LaplacianKind::Normalized).unwrap();
        assert!(d.eigenvalues[0].abs() <= 1e-9);
        assert!(d.eigenvalues[1] > 1e-6, "clip graphs are connected");
    }

    let out = dir.path().join("graphs");
    save_graph_set(&out, &set).unwrap();
    assert_eq!(load_graph_set(&out).unwrap(), set);
}
