//! Node and edge masking for self-supervised reconstruction.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gnn::GraphInput;
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSpec {
    /// Sorted node indices whose raw features were zeroed.
    pub masked_nodes: Vec<usize>,
    /// Sorted `(i, j)` pairs with `i < j` hidden from the encoder.
    pub masked_edges: Vec<(usize, usize)>,
}

impl MaskSpec {
    pub fn is_empty(&self) -> bool {
        self.masked_nodes.is_empty() && self.masked_edges.is_empty()
    }
}

/// `⌈fraction · n⌉`, computed with a small guard against representation
/// error (`0.1 · 10` must give 1, not 2).
fn ceil_count(fraction: f64, n: usize) -> usize {
    (fraction * n as f64 - 1e-9).ceil().max(0.0) as usize
}

/// Number of nodes masked for a graph of `n` nodes, leaving at least one
/// node unmasked.
pub fn masked_node_count(fraction: f64, n: usize) -> usize {
    ceil_count(fraction, n).min(n.saturating_sub(1))
}

/// Zeroes the raw feature columns of `⌈mask_fraction · n⌉` randomly chosen
/// nodes. Positional columns, the adjacency and the reconstruction target
/// are left as they are.
pub fn mask_graph(
    input: &GraphInput,
    mask_fraction: f64,
    rng: &mut impl Rng,
) -> Result<(GraphInput, MaskSpec)> {
    mask_graph_with_edges(input, mask_fraction, 0.0, rng)
}

/// As [`mask_graph`], additionally removing `⌈edge_fraction · |E|⌉` edges from
/// the encoder's adjacency. The Laplacian target still describes the full
/// graph.
pub fn mask_graph_with_edges(
    input: &GraphInput,
    mask_fraction: f64,
    edge_fraction: f64,
    rng: &mut impl Rng,
) -> Result<(GraphInput, MaskSpec)> {
    let n = input.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "masking needs at least 2 nodes, graph has {n}"
        )));
    }
    if !(0.0..1.0).contains(&mask_fraction) || !(0.0..1.0).contains(&edge_fraction) {
        return Err(Error::InvalidInput(
            "mask fractions must be in [0, 1)".into(),
        ));
    }
    let mut out = input.clone();
    let mut spec = MaskSpec::default();

    let count = masked_node_count(mask_fraction, n);
    if count > 0 {
        let mut nodes = sample(rng, n, count).into_vec();
        nodes.sort_unstable();
        for &i in &nodes {
            out.features
                .row_mut(i)
                .iter_mut()
                .take(input.raw_dim)
                .for_each(|v| *v = 0.0);
        }
        spec.masked_nodes = nodes;
    }

    if edge_fraction > 0.0 {
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|&(i, j)| input.adjacency[[i, j]] > 0.0)
            .collect();
        let count = ceil_count(edge_fraction, edges.len()).min(edges.len());
        if count > 0 {
            let mut picked: Vec<(usize, usize)> = sample(rng, edges.len(), count)
                .into_iter()
                .map(|k| edges[k])
                .collect();
            picked.sort_unstable();
            for &(i, j) in &picked {
                out.adjacency[[i, j]] = 0.0;
                out.adjacency[[j, i]] = 0.0;
            }
            spec.masked_edges = picked;
        }
    }
    Ok((out, spec))
}
