use ndarray::{ArrayD, IxDyn};
use proptest::prelude::*;
use rand::Rng;

use surgnn::dataio::Split;
use surgnn::gnn::GraphInput;
use surgnn::seeded_rng;
use surgnn::train::{
    adam_step, adasyn_balance, category_labels, lr_schedule, mask_graph, masked_node_count,
    train_ssl, train_ssl_graphs, train_supervised, train_supervised_graphs, AdamState, TrainConfig,
};

mod common;

fn quick_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 16,
        seed: 5,
        ..TrainConfig::default()
    }
}

/// Largest possible `|m̂| / sqrt(v̂)` after `t` steps, from Cauchy–Schwarz on
/// the moment sums (needs `β1² < β2`).
fn adam_ratio_bound(b1: f64, b2: f64, t: i32) -> f64 {
    let c = (1.0 - b1).powi(2) / ((1.0 - b2) * (1.0 - b1 * b1 / b2));
    c.sqrt() * (1.0 - b2.powi(t)).sqrt() / (1.0 - b1.powi(t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lr_schedule_never_increases(lr0 in 1e-5f64..1.0, d1 in 1usize..500, gap in 0usize..500, factor in 0.01f64..1.0) {
        let cfg = TrainConfig { lr0, decay_epochs: vec![d1, d1 + gap], decay_factor: factor, ..TrainConfig::default() };
        let mut prev = f64::INFINITY;
        for e in 0..1200 {
            let lr = lr_schedule(e, &cfg);
            prop_assert!(lr <= prev);
            prev = lr;
        }
    }

    #[test]
    fn adam_updates_stay_bounded(grads in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 4), 1..30), lr in 1e-4f64..1.0) {
        let (b1, b2) = (0.9, 0.999);
        let mut state = AdamState::new(b1, b2, 1e-8);
        let mut p = ArrayD::<f64>::zeros(IxDyn(&[4]));
        for (t, g) in grads.iter().enumerate() {
            let g = ArrayD::from_shape_vec(IxDyn(&[4]), g.clone()).unwrap();
            let before = p.clone();
            adam_step(&mut [("p", p.view_mut())], &[("p", g.view())], &mut state, lr).unwrap();
            let bound = lr * adam_ratio_bound(b1, b2, t as i32 + 1) * (1.0 + 1e-12);
            for (a, b) in p.iter().zip(before.iter()) {
                prop_assert!((a - b).abs() <= bound, "step {}: |Δ| {} > {}", t + 1, (a - b).abs(), bound);
            }
            if t == 0 {
                for ((a, b), gi) in p.iter().zip(before.iter()).zip(g.iter()) {
                    let d = (a - b).abs();
                    if gi.abs() > 1e-2 {
                        prop_assert!(d >= lr * (1.0 - 1e-6) && d <= lr, "first step |Δ| = {}", d);
                    }
                }
            }
        }
    }

    #[test]
    fn masked_count_is_ceiling_capped(f in 0.0f64..1.0, n in 2usize..64) {
        let c = masked_node_count(f, n);
        prop_assert!(c < n);
        if f > 0.0 {
            prop_assert!(c >= 1);
            prop_assert!(c as f64 >= (f * n as f64 - 1e-9).ceil().min((n - 1) as f64));
        } else {
            prop_assert_eq!(c, 0);
        }
    }

    #[test]
    fn adasyn_balances_with_convex_synthetics(
        sizes in prop::collection::vec(2usize..14, 2..4),
        k in 1usize..9,
        seed in any::<u64>(),
    ) {
        let mut rng = seeded_rng(seed);
        let mut vectors = Vec::new();
        let mut labels = Vec::new();
        for (c, &m) in sizes.iter().enumerate() {
            for _ in 0..m {
                vectors.push((0..3).map(|d| rng.random::<f64>() + (c * d) as f64 * 0.3).collect::<Vec<f64>>());
                labels.push(c);
            }
        }
        let out = adasyn_balance(&vectors, &labels, k, &mut seeded_rng(seed ^ 1)).unwrap();
        let majority = *sizes.iter().max().unwrap();
        for c in 0..sizes.len() {
            prop_assert_eq!(out.labels.iter().filter(|&&l| l == c).count(), majority);
        }
        prop_assert_eq!(&out.vectors[..vectors.len()], &vectors[..]);
        prop_assert_eq!(&out.labels[..labels.len()], &labels[..]);
        prop_assert_eq!(out.synthetic.len(), out.vectors.len() - vectors.len());
        for (s, v) in out.synthetic.iter().zip(&out.vectors[vectors.len()..]) {
            prop_assert!(s.source != s.partner);
            prop_assert_eq!(labels[s.source], s.class);
            prop_assert_eq!(labels[s.partner], s.class);
            prop_assert!((0.0..=1.0).contains(&s.lambda));
            for d in 0..3 {
                let expect = (1.0 - s.lambda) * vectors[s.source][d] + s.lambda * vectors[s.partner][d];
                prop_assert!((v[d] - expect).abs() <= 1e-9);
            }
        }
        let fallback = sizes.iter().any(|&m| m < majority && m < k + 1);
        prop_assert_eq!(fallback, !out.warnings.is_empty());
    }
}

#[test]
fn default_schedule_values() {
    let cfg = TrainConfig::default();
    assert_eq!(lr_schedule(0, &cfg), 0.0025);
    assert!((lr_schedule(200, &cfg) - 0.00025).abs() < 1e-18);
    assert!((lr_schedule(999, &cfg) - 0.000025).abs() < 1e-18);
}

#[test]
fn masking_ten_nodes_at_fifteen_percent_masks_two() {
    let dir = tempfile::tempdir().unwrap();
    let set = common::graph_set(&common::small_spec(6, 1), dir.path());
    let input = GraphInput::from_graph(&set.graphs[0], 4).unwrap();
    let (masked, spec) = mask_graph(&input, 0.15, &mut seeded_rng(2)).unwrap();
    assert_eq!(
        spec.masked_nodes.len(),
        masked_node_count(0.15, input.len())
    );
    assert_eq!(masked_node_count(0.15, 10), 2);
    let (_, again) = mask_graph(&input, 0.15, &mut seeded_rng(2)).unwrap();
    assert_eq!(spec, again);
    assert_eq!(masked.adjacency, input.adjacency);
    assert_eq!(masked.laplacian, input.laplacian);
}

#[test]
fn single_graph_ssl_settles() {
    let dir = tempfile::tempdir().unwrap();
    let set = common::graph_set(&common::small_spec(6, 1), dir.path());
    let cfg = TrainConfig {
        mask_fraction: 0.0,
        epochs: 400,
        ..quick_config(400)
    };
    let (_, history) = train_ssl_graphs(&[&set.graphs[0]], 5, &cfg).unwrap();
    let loss: Vec<f64> = history.iter().map(|h| h.loss).collect();
    for e in 100..loss.len() - 50 {
        assert!(
            loss[e + 50] <= loss[e] * (1.0 + 1e-6),
            "loss rose from {} at epoch {e} to {} at {}",
            loss[e],
            loss[e + 50],
            e + 50
        );
    }
}

#[test]
fn ssl_descends_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let set = common::graph_set(&common::small_spec(30, 2), dir.path());
    let cfg = quick_config(120);
    let (ckpt_a, hist_a) = train_ssl(&set, &cfg).unwrap();
    let (ckpt_b, hist_b) = train_ssl(&set, &cfg).unwrap();
    assert!(hist_a.last().unwrap().loss < hist_a[0].loss);
    assert_eq!(hist_a, hist_b);
    assert_eq!(ckpt_a, ckpt_b);
    assert!(ckpt_a.category.is_none());
}

#[test]
fn separable_synthetic_classes_are_learned() {
    let dir = tempfile::tempdir().unwrap();
    let set = common::graph_set(&common::small_spec(60, 3), dir.path());
    let run = train_supervised(&set, &quick_config(150), "Overall", None).unwrap();
    let acc = run.history.last().unwrap().accuracy.unwrap();
    assert!(acc >= 0.95, "training accuracy {acc}");
    assert_eq!(run.checkpoint.category.as_deref(), Some("Overall"));
}

#[test]
fn identical_labels_give_constant_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let set = common::graph_set(&common::small_spec(20, 4), dir.path());
    let graphs = set.split(Split::Train);
    let labels = vec![2; graphs.len()];
    let (model, history) =
        train_supervised_graphs(&graphs, &labels, 5, &quick_config(60), None).unwrap();
    assert!(history.last().unwrap().loss < 0.05 * history[0].loss);
    for g in &set.graphs {
        assert_eq!(
            model
                .predict(&GraphInput::from_graph(g, 4).unwrap())
                .unwrap(),
            2
        );
    }
}

#[test]
fn warm_and_cold_starts_are_each_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let set = common::graph_set(&common::small_spec(24, 5), dir.path());
    let cfg = quick_config(30);
    let (encoder, _) = train_ssl(&set, &cfg).unwrap();
    let cold_a = train_supervised(&set, &cfg, "Overall", None).unwrap();
    let cold_b = train_supervised(&set, &cfg, "Overall", None).unwrap();
    let warm_a = train_supervised(&set, &cfg, "Overall", Some(&encoder)).unwrap();
    let warm_b = train_supervised(&set, &cfg, "Overall", Some(&encoder)).unwrap();
    assert_eq!(cold_a, cold_b);
    assert_eq!(warm_a, warm_b);
    assert_ne!(cold_a.history, warm_a.history);
    // Only the warm start copies the pretrained encoder.
    assert_ne!(cold_a.checkpoint.layer1, warm_a.checkpoint.layer1);
}

#[test]
fn frozen_encoder_keeps_pretrained_layers() {
    let dir = tempfile::tempdir().unwrap();
    let set = common::graph_set(&common::small_spec(24, 6), dir.path());
    let cfg = quick_config(20);
    let (encoder, _) = train_ssl(&set, &cfg).unwrap();
    let probe_cfg = TrainConfig {
        freeze_encoder: true,
        ..cfg
    };
    let run = train_supervised(&set, &probe_cfg, "Overall", Some(&encoder)).unwrap();
    assert_eq!(run.checkpoint.layer1, encoder.layer1);
    assert_eq!(run.checkpoint.layer2, encoder.layer2);
    assert_ne!(run.checkpoint.head, encoder.head);
}

#[test]
fn unknown_category_and_bad_labels_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let set = common::graph_set(&common::small_spec(12, 7), dir.path());
    assert!(train_supervised(&set, &quick_config(2), "Handedness", None).is_err());
    let graphs = set.split(Split::Train);
    assert!(category_labels(&graphs, "Handedness", &set.index.ordinal_scale).is_err());
    let labels = vec![9; graphs.len()];
    assert!(train_supervised_graphs(&graphs, &labels, 5, &quick_config(2), None).is_err());
}
