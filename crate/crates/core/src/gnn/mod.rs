//! The encoder (two attention layers), mean-pool readout, linear head and
//! Laplacian decoder, with hand-written reverse-mode gradients.

mod backprop;
mod checkpoint;
mod layer;
mod loss;

use ndarray::{concatenate, Array1, Array2, ArrayViewD, ArrayViewMutD, Axis};
use rand::Rng;

use crate::graph::{normalized_laplacian, positional_features, validate_adjacency, SurgicalGraph};
use crate::{Error, Result};

pub use backprop::{forward_backward, loss_value, Target};
pub use checkpoint::{
    load_checkpoint, save_checkpoint, HeadRecord, LayerRecord, ModelCheckpoint, CHECKPOINT_VERSION,
};
pub use layer::{
    attention_coefficients, gat_layer_forward, GatGradients, GatLayerParams, Neighborhood,
};
pub use loss::{
    classify, cross_entropy_loss, decode_laplacian, global_mean_pool, logistic, softmax,
    spectral_loss, LinearHead,
};

pub const HIDDEN_DIM: usize = 64;
pub const EMBED_DIM: usize = 32;
pub const LEAKY_SLOPE: f64 = 0.2;
/// Temperature of the inner-product edge decoder.
pub const DEFAULT_DECODER_SCALE: f64 = 0.25;

/// Names of the parameter blocks, in the order used by
/// [`GnnModel::blocks_mut`] and [`GnnGradients::blocks`].
pub const BLOCK_NAMES: [&str; 8] = [
    "layer1.weight",
    "layer1.att_src",
    "layer1.att_dst",
    "layer2.weight",
    "layer2.att_src",
    "layer2.att_dst",
    "head.weight",
    "head.bias",
];

#[derive(Debug, Clone, PartialEq)]
pub struct GnnModel {
    pub layer1: GatLayerParams,
    pub layer2: GatLayerParams,
    pub head: LinearHead,
    pub decoder_scale: f64,
}

/// Gradients with the same layout as [`GnnModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct GnnGradients {
    pub layer1: GatGradients,
    pub layer2: GatGradients,
    pub head_weight: Array2<f64>,
    pub head_bias: Array1<f64>,
}

fn glorot(
    rng: &mut impl Rng,
    rows: usize,
    cols: usize,
    fan_in: usize,
    fan_out: usize,
) -> Array2<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-limit..limit))
}

fn layer(rng: &mut impl Rng, input: usize, output: usize) -> GatLayerParams {
    let weight = glorot(rng, output, input, input, output);
    let att_src = glorot(rng, output, 1, output, 1)
        .into_shape_with_order(output)
        .unwrap();
    let att_dst = glorot(rng, output, 1, output, 1)
        .into_shape_with_order(output)
        .unwrap();
    GatLayerParams {
        weight,
        att_src,
        att_dst,
        leaky_slope: LEAKY_SLOPE,
    }
}

impl GnnModel {
    /// Glorot-uniform weights, zero head bias.
    pub fn new(in_dim: usize, num_classes: usize, rng: &mut impl Rng) -> Self {
        let layer1 = layer(rng, in_dim, HIDDEN_DIM);
        let layer2 = layer(rng, HIDDEN_DIM, EMBED_DIM);
        let head = LinearHead {
            weight: glorot(rng, num_classes, EMBED_DIM, EMBED_DIM, num_classes),
            bias: Array1::zeros(num_classes),
        };
        Self {
            layer1,
            layer2,
            head,
            decoder_scale: DEFAULT_DECODER_SCALE,
        }
    }

    /// Every parameter zero.
    pub fn zeros(in_dim: usize, num_classes: usize) -> Self {
        let zero_layer = |i: usize, o: usize| GatLayerParams {
            weight: Array2::zeros((o, i)),
            att_src: Array1::zeros(o),
            att_dst: Array1::zeros(o),
            leaky_slope: LEAKY_SLOPE,
        };
        Self {
            layer1: zero_layer(in_dim, HIDDEN_DIM),
            layer2: zero_layer(HIDDEN_DIM, EMBED_DIM),
            head: LinearHead {
                weight: Array2::zeros((num_classes, EMBED_DIM)),
                bias: Array1::zeros(num_classes),
            },
            decoder_scale: DEFAULT_DECODER_SCALE,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.layer1.in_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.head.bias.len()
    }

    pub fn embed_dim(&self) -> usize {
        self.layer2.out_dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer2.in_dim() != self.layer1.out_dim()
            || self.head.weight.ncols() != self.layer2.out_dim()
        {
            return Err(Error::Shape(format!(
                "layer widths {}→{}, {}→{}, head {:?} do not chain",
                self.layer1.in_dim(),
                self.layer1.out_dim(),
                self.layer2.in_dim(),
                self.layer2.out_dim(),
                self.head.weight.dim()
            )));
        }
        if self.head.weight.nrows() != self.head.bias.len() {
            return Err(Error::Shape(
                "head weight and bias disagree on class count".into(),
            ));
        }
        if !(self.decoder_scale.is_finite() && self.decoder_scale > 0.0) {
            return Err(Error::InvalidInput("decoder_scale must be positive".into()));
        }
        if self
            .blocks()
            .iter()
            .any(|(_, b)| b.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::NonFinite("model parameters".into()));
        }
        Ok(())
    }

    pub fn blocks(&self) -> [(&'static str, ArrayViewD<'_, f64>); 8] {
        let [n0, n1, n2, n3, n4, n5, n6, n7] = BLOCK_NAMES;
        [
            (n0, self.layer1.weight.view().into_dyn()),
            (n1, self.layer1.att_src.view().into_dyn()),
            (n2, self.layer1.att_dst.view().into_dyn()),
            (n3, self.layer2.weight.view().into_dyn()),
            (n4, self.layer2.att_src.view().into_dyn()),
            (n5, self.layer2.att_dst.view().into_dyn()),
            (n6, self.head.weight.view().into_dyn()),
            (n7, self.head.bias.view().into_dyn()),
        ]
    }

    /// Mutable views of the eight parameter blocks, named by [`BLOCK_NAMES`].
    pub fn blocks_mut(&mut self) -> [(&'static str, ArrayViewMutD<'_, f64>); 8] {
        let [n0, n1, n2, n3, n4, n5, n6, n7] = BLOCK_NAMES;
        [
            (n0, self.layer1.weight.view_mut().into_dyn()),
            (n1, self.layer1.att_src.view_mut().into_dyn()),
            (n2, self.layer1.att_dst.view_mut().into_dyn()),
            (n3, self.layer2.weight.view_mut().into_dyn()),
            (n4, self.layer2.att_src.view_mut().into_dyn()),
            (n5, self.layer2.att_dst.view_mut().into_dyn()),
            (n6, self.head.weight.view_mut().into_dyn()),
            (n7, self.head.bias.view_mut().into_dyn()),
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.blocks().iter().map(|(_, b)| b.len()).sum()
    }

    /// Node embeddings `Z` (n × 32).
    pub fn embed(&self, input: &GraphInput) -> Result<Array2<f64>> {
        Ok(backprop::encode(self, input)?.embeddings)
    }

    /// Mean-pooled graph embedding.
    pub fn pooled(&self, input: &GraphInput) -> Result<Array1<f64>> {
        global_mean_pool(&self.embed(input)?)
    }

    pub fn logits(&self, input: &GraphInput) -> Result<Array1<f64>> {
        classify(&self.pooled(input)?, &self.head)
    }

    /// Most likely class index; ties go to the lower index.
    pub fn predict(&self, input: &GraphInput) -> Result<usize> {
        Ok(argmax(&self.logits(input)?))
    }
}

pub(crate) fn argmax(v: &Array1<f64>) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

impl GnnGradients {
    pub fn zeros_like(model: &GnnModel) -> Self {
        Self {
            layer1: model.layer1.zero_gradients(),
            layer2: model.layer2.zero_gradients(),
            head_weight: Array2::zeros(model.head.weight.raw_dim()),
            head_bias: Array1::zeros(model.head.bias.len()),
        }
    }

    pub fn blocks(&self) -> [(&'static str, ArrayViewD<'_, f64>); 8] {
        let [n0, n1, n2, n3, n4, n5, n6, n7] = BLOCK_NAMES;
        [
            (n0, self.layer1.weight.view().into_dyn()),
            (n1, self.layer1.att_src.view().into_dyn()),
            (n2, self.layer1.att_dst.view().into_dyn()),
            (n3, self.layer2.weight.view().into_dyn()),
            (n4, self.layer2.att_src.view().into_dyn()),
            (n5, self.layer2.att_dst.view().into_dyn()),
            (n6, self.head_weight.view().into_dyn()),
            (n7, self.head_bias.view().into_dyn()),
        ]
    }

    /// `self += other * scale`.
    pub fn add_scaled(&mut self, other: &GnnGradients, scale: f64) {
        let pairs = [
            (&mut self.layer1.weight, &other.layer1.weight),
            (&mut self.layer2.weight, &other.layer2.weight),
            (&mut self.head_weight, &other.head_weight),
        ];
        for (a, b) in pairs {
            a.scaled_add(scale, b);
        }
        let pairs = [
            (&mut self.layer1.att_src, &other.layer1.att_src),
            (&mut self.layer1.att_dst, &other.layer1.att_dst),
            (&mut self.layer2.att_src, &other.layer2.att_src),
            (&mut self.layer2.att_dst, &other.layer2.att_dst),
            (&mut self.head_bias, &other.head_bias),
        ];
        for (a, b) in pairs {
            a.scaled_add(scale, b);
        }
    }
}

/// Everything the model consumes for one graph: encoder features (raw node
/// features, optionally followed by positional columns), the encoder's view
/// of the adjacency, and the normalized Laplacian used as the reconstruction
/// target.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput {
    pub features: Array2<f64>,
    pub adjacency: Array2<f64>,
    pub laplacian: Array2<f64>,
    /// Number of leading raw feature columns (the rest are positional).
    pub raw_dim: usize,
}

impl GraphInput {
    /// Uses `features` as given.
    pub fn new(features: Array2<f64>, adjacency: Array2<f64>) -> Result<Self> {
        validate_adjacency(&adjacency)?;
        if features.nrows() != adjacency.nrows() {
            return Err(Error::Shape(format!(
                "{} feature rows for a {}-node adjacency",
                features.nrows(),
                adjacency.nrows()
            )));
        }
        if features.nrows() == 0 {
            return Err(Error::InvalidInput("graph has no nodes".into()));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("node features".into()));
        }
        let laplacian = normalized_laplacian(&adjacency)?;
        let raw_dim = features.ncols();
        Ok(Self {
            features,
            adjacency,
            laplacian,
            raw_dim,
        })
    }

    /// Node features followed by `spectral_k` positional columns (the
    /// eigenvectors of the smallest normalized-Laplacian eigenvalues,
    /// zero-padded for graphs with fewer than `spectral_k` nodes).
    pub fn with_positional(
        features: &Array2<f64>,
        adjacency: &Array2<f64>,
        spectral_k: usize,
    ) -> Result<Self> {
        let mut input = Self::new(features.clone(), adjacency.clone())?;
        if spectral_k > 0 {
            let pos = positional_features(adjacency, spectral_k)?;
            input.features = concatenate(Axis(1), &[features.view(), pos.view()])
                .map_err(|e| Error::Shape(e.to_string()))?;
        }
        Ok(input)
    }

    pub fn from_graph(graph: &SurgicalGraph, spectral_k: usize) -> Result<Self> {
        graph.validate()?;
        Self::with_positional(&graph.features, &graph.adjacency, spectral_k)
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    /// Applies the node permutation `perm` (new row `i` is old row
    /// `perm[i]`) to features, adjacency and Laplacian.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.len();
        let features = self.features.select(Axis(0), perm);
        let adjacency = Array2::from_shape_fn((n, n), |(i, j)| self.adjacency[[perm[i], perm[j]]]);
        let laplacian = Array2::from_shape_fn((n, n), |(i, j)| self.laplacian[[perm[i], perm[j]]]);
        Self {
            features,
            adjacency,
            laplacian,
            raw_dim: self.raw_dim,
        }
    }
}
