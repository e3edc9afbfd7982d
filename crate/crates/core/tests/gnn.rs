use approx::assert_abs_diff_eq;
use ndarray::{Array1, Array2, Axis};
use proptest::prelude::*;
use rand::Rng;

use surgnn::gnn::{
    forward_backward, global_mean_pool, loss_value, softmax, GnnModel, GraphInput, Target,
    BLOCK_NAMES,
};
use surgnn::graph::{symmetric_eigendecomposition, JacobiOptions};
use surgnn::seeded_rng;

fn random_graph(rng: &mut impl Rng, n: usize, width: usize, density: f64) -> GraphInput {
    let features = Array2::from_shape_simple_fn((n, width), || rng.random_range(-1.0..1.0));
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < density {
                let w = rng.random_range(0.5..2.0);
                a[[i, j]] = w;
                a[[j, i]] = w;
            }
        }
    }
    GraphInput::new(features, a).unwrap()
}

/// Fraction of coordinates per block whose analytic gradient agrees with a
/// central difference (step 1e-5) to relative error 1e-5.
fn fd_agreement(
    model: &GnnModel,
    input: &GraphInput,
    target: Target<'_>,
) -> Vec<(&'static str, f64)> {
    const H: f64 = 1e-5;
    // One ulp of an O(1) loss divided by 2h is ~1e-11, so relative error is
    // measured against at least this magnitude (absolute agreement 1e-10).
    const FLOOR: f64 = 1e-5;
    let (_, grads) = forward_backward(model, input, target).unwrap();
    let analytic: Vec<Vec<f64>> = grads
        .blocks()
        .iter()
        .map(|(_, b)| b.iter().copied().collect())
        .collect();
    let mut out = Vec::new();
    for (b, name) in BLOCK_NAMES.iter().enumerate() {
        let len = analytic[b].len();
        let mut good = 0;
        for (k, &a) in analytic[b].iter().enumerate() {
            let mut plus = model.clone();
            plus.blocks_mut()[b].1.as_slice_mut().unwrap()[k] += H;
            let mut minus = model.clone();
            minus.blocks_mut()[b].1.as_slice_mut().unwrap()[k] -= H;
            let fd = (loss_value(&plus, input, target).unwrap()
                - loss_value(&minus, input, target).unwrap())
                / (2.0 * H);
            let rel = (fd - a).abs() / a.abs().max(fd.abs()).max(FLOOR);
            if rel <= 1e-5 {
                good += 1;
            }
        }
        out.push((*name, good as f64 / len as f64));
    }
    out
}

#[test]
fn gradients_match_finite_differences_on_five_nodes() {
    let mut rng = seeded_rng(11);
    for trial in 0..6 {
        let input = random_graph(&mut rng, 5, 6, 0.5);
        let model = GnnModel::new(6, 3, &mut rng);
        let lap = input.laplacian.clone();
        for target in [
            Target::Spectral(&lap),
            Target::Class(trial % 3),
            Target::Joint {
                label: 1,
                laplacian: &lap,
                spectral_weight: 0.5,
            },
        ] {
            for (name, frac) in fd_agreement(&model, &input, target) {
                assert!(
                    frac >= 0.99,
                    "trial {trial} {target:?} block {name}: {frac}"
                );
            }
        }
    }
}

#[test]
fn zero_model_has_deterministic_loss_and_unused_blocks_zero() {
    let mut rng = seeded_rng(3);
    let input = random_graph(&mut rng, 4, 5, 0.6);
    let model = GnnModel::zeros(5, 5);
    let (l1, g1) = forward_backward(&model, &input, Target::Class(2)).unwrap();
    let (l2, g2) = forward_backward(&model, &input, Target::Class(2)).unwrap();
    assert_eq!(l1, l2);
    assert_eq!(g1, g2);
    assert_abs_diff_eq!(l1, 5f64.ln(), epsilon = 1e-15);
    // The spectral objective never reaches the head.
    let (_, g) = forward_backward(&model, &input, Target::Spectral(&input.laplacian)).unwrap();
    assert!(g.head_weight.iter().all(|v| *v == 0.0));
    assert!(g.head_bias.iter().all(|v| *v == 0.0));
}

#[test]
fn single_node_head_gradient_is_softmax_minus_onehot_outer_pooled() {
    let mut rng = seeded_rng(5);
    let input = random_graph(&mut rng, 1, 4, 0.0);
    let model = GnnModel::new(4, 5, &mut rng);
    let label = 3;
    let (_, g) = forward_backward(&model, &input, Target::Class(label)).unwrap();
    let pooled = model.pooled(&input).unwrap();
    let mut d = softmax(&model.logits(&input).unwrap());
    d[label] -= 1.0;
    for c in 0..5 {
        assert_abs_diff_eq!(g.head_bias[c], d[c], epsilon = 1e-15);
        for k in 0..pooled.len() {
            assert_abs_diff_eq!(g.head_weight[[c, k]], d[c] * pooled[k], epsilon = 1e-15);
        }
    }
}

#[test]
fn classify_matches_matrix_multiply_oracle() {
    let mut rng = seeded_rng(8);
    let model = GnnModel::new(3, 4, &mut rng);
    let pooled = Array1::from_shape_simple_fn(32, || rng.random_range(-1.0..1.0));
    let logits = surgnn::gnn::classify(&pooled, &model.head).unwrap();
    for c in 0..4 {
        let mut acc = model.head.bias[c];
        for k in 0..32 {
            acc += model.head.weight[[c, k]] * pooled[k];
        }
        assert_abs_diff_eq!(logits[c], acc, epsilon = 1e-12);
    }
}

#[test]
fn positional_input_width_is_padded() {
    let mut rng = seeded_rng(2);
    let g = random_graph(&mut rng, 2, 3, 1.0);
    let input = GraphInput::with_positional(&g.features, &g.adjacency, 4).unwrap();
    assert_eq!(input.features.ncols(), 7);
    assert!(input.features.column(5).iter().all(|v| *v == 0.0));
    assert!(input.features.column(6).iter().all(|v| *v == 0.0));
    let model = GnnModel::new(7, 5, &mut rng);
    assert_eq!(model.embed(&input).unwrap().dim(), (2, 32));
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let mut rng = seeded_rng(4);
    let model = GnnModel::new(18, 5, &mut rng);
    let ckpt = surgnn::gnn::ModelCheckpoint::from_model(
        &model,
        "kinematic-v1",
        4,
        Some("Overall"),
        Default::default(),
    );
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    surgnn::gnn::save_checkpoint(&path, &ckpt).unwrap();
    let back = surgnn::gnn::load_checkpoint(&path).unwrap();
    assert_eq!(back, ckpt);
    assert_eq!(back.to_model().unwrap(), model);
    assert!(back.check_schema("kinematic-v1", 14).is_ok());
    assert!(matches!(
        back.check_schema("other", 14),
        Err(surgnn::Error::SchemaMismatch { .. })
    ));
}

fn random_perm(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        p.swap(i, rng.random_range(0..=i));
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn permutation_invariance(seed in 0u64..10_000, n in 1usize..9) {
        let mut rng = seeded_rng(seed);
        let input = random_graph(&mut rng, n, 5, 0.5);
        let model = GnnModel::new(5, 3, &mut rng);
        let perm = random_perm(&mut rng, n);
        let p_input = input.permuted(&perm);
        let pooled = model.pooled(&input).unwrap();
        let p_pooled = model.pooled(&p_input).unwrap();
        for k in 0..pooled.len() {
            prop_assert!((pooled[k] - p_pooled[k]).abs() <= 1e-9);
        }
        for label in 0..3 {
            let a = loss_value(&model, &input, Target::Class(label)).unwrap();
            let b = loss_value(&model, &p_input, Target::Class(label)).unwrap();
            prop_assert!((a - b).abs() <= 1e-9);
        }
        let a = loss_value(&model, &input, Target::Spectral(&input.laplacian)).unwrap();
        let b = loss_value(&model, &p_input, Target::Spectral(&p_input.laplacian)).unwrap();
        prop_assert!((a - b).abs() <= 1e-9);
    }

    #[test]
    fn attention_rows_sum_to_one(seed in 0u64..10_000, n in 1usize..9) {
        let mut rng = seeded_rng(seed);
        let input = random_graph(&mut rng, n, 4, 0.4);
        let model = GnnModel::new(4, 2, &mut rng);
        let alpha = surgnn::gnn::attention_coefficients(&input.features, &input.adjacency, &model.layer1).unwrap();
        for i in 0..n {
            prop_assert!((alpha.row(i).sum() - 1.0).abs() <= 1e-12);
            for j in 0..n {
                if i != j && input.adjacency[[i, j]] == 0.0 {
                    prop_assert_eq!(alpha[[i, j]], 0.0);
                }
            }
        }
    }

    #[test]
    fn decoded_laplacian_is_a_normalized_laplacian(seed in 0u64..10_000, n in 1usize..10) {
        let mut rng = seeded_rng(seed);
        let z = Array2::from_shape_simple_fn((n, 32), || rng.random_range(-1.0..1.0));
        let l = surgnn::gnn::decode_laplacian(&z, 0.7).unwrap();
        let eig = symmetric_eigendecomposition(&l, JacobiOptions::default()).unwrap();
        for v in eig.eigenvalues.iter() {
            prop_assert!(*v >= -1e-9 && *v <= 2.0 + 1e-9);
        }
        // Complete positive weights: connected, so exactly one zero eigenvalue
        // once n > 1.
        if n > 1 {
            prop_assert!(eig.eigenvalues[0].abs() < 1e-9);
            prop_assert!(eig.eigenvalues[1] > 1e-6);
        }
    }

    #[test]
    fn spectral_loss_nonnegative_and_zero_at_identity(seed in 0u64..10_000, n in 1usize..8) {
        let mut rng = seeded_rng(seed);
        let a = Array2::from_shape_simple_fn((n, n), || rng.random_range(-1.0..1.0));
        let b = Array2::from_shape_simple_fn((n, n), || rng.random_range(-1.0..1.0));
        prop_assert_eq!(surgnn::gnn::spectral_loss(&a, &a).unwrap(), 0.0);
        prop_assert!(surgnn::gnn::spectral_loss(&a, &b).unwrap() > 0.0);
    }
}

#[test]
fn pooled_is_mean_of_embeddings() {
    let mut rng = seeded_rng(9);
    let input = random_graph(&mut rng, 6, 3, 0.5);
    let model = GnnModel::new(3, 2, &mut rng);
    let z = model.embed(&input).unwrap();
    assert_eq!(global_mean_pool(&z).unwrap(), z.mean_axis(Axis(0)).unwrap());
}
