//! Surgical graphs: one node per (instrument, phase) unit, temporal edges
//! between consecutive phases of one instrument and co-occurrence edges
//! between instruments active in the same phase.

mod dataset;
mod eigen;
mod io;
mod laplacian;

use std::collections::{BTreeMap, HashMap};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataio::Mode;
use crate::features::NodeFeatureVector;
use crate::{Error, Result};

pub use dataset::build_graph_set;
pub use eigen::{
    check_symmetric, fix_sign, symmetric_eigendecomposition, JacobiOptions, SymmetricEigen,
};
pub use io::{
    load_graph, load_graph_set, save_graph, save_graph_set, GraphEntry, GraphFile, GraphIndex,
    GraphSet,
};
pub use laplacian::{
    degrees, laplacian, normalized_laplacian, positional_features, spectral_embedding,
    unnormalized_laplacian, validate_adjacency, LaplacianDecomposition, LaplacianKind,
};

pub(crate) use laplacian::normalized_laplacian_unchecked;

/// Identity of a graph node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    pub instrument_id: String,
    pub phase_name: String,
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.instrument_id, self.phase_name)
    }
}

/// Edge weights used by [`build_graph`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgePolicy {
    pub temporal_weight: f64,
    pub cooccurrence_weight: f64,
}

impl Default for EdgePolicy {
    fn default() -> Self {
        Self {
            temporal_weight: 1.0,
            cooccurrence_weight: 1.0,
        }
    }
}

impl EdgePolicy {
    pub fn validate(&self) -> Result<()> {
        let ok = |w: f64| w.is_finite() && w >= 0.0;
        if !ok(self.temporal_weight) || !ok(self.cooccurrence_weight) {
            return Err(Error::InvalidInput(
                "edge weights must be finite and >= 0".into(),
            ));
        }
        if self.temporal_weight == 0.0 && self.cooccurrence_weight == 0.0 {
            return Err(Error::InvalidInput(
                "at least one edge weight must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurgicalGraph {
    pub clip_id: String,
    pub mode: Mode,
    pub feature_schema: String,
    pub node_ids: Vec<NodeId>,
    /// Node features, one row per node.
    pub features: Array2<f64>,
    /// Symmetric, non-negative, zero-diagonal weights.
    pub adjacency: Array2<f64>,
    pub labels: BTreeMap<String, i64>,
}

impl SurgicalGraph {
    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.node_ids.len();
        if n == 0 {
            return Err(Error::Validation(format!(
                "graph {} has no nodes",
                self.clip_id
            )));
        }
        if self.features.nrows() != n || self.adjacency.dim() != (n, n) {
            return Err(Error::Shape(format!(
                "graph {}: {} nodes, X is {:?}, A is {:?}",
                self.clip_id,
                n,
                self.features.dim(),
                self.adjacency.dim()
            )));
        }
        if self.features.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!(
                "features of graph {}",
                self.clip_id
            )));
        }
        validate_adjacency(&self.adjacency)
    }

    /// Number of undirected edges with positive weight.
    pub fn edge_count(&self) -> usize {
        let n = self.len();
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.adjacency[[i, j]] > 0.0)
            .count()
    }

    /// Column-wise mean of the node features.
    pub fn pooled_features(&self) -> Vec<f64> {
        let n = self.len().max(1) as f64;
        self.features
            .columns()
            .into_iter()
            .map(|c| c.sum() / n)
            .collect()
    }
}

/// Builds one clip's graph. Nodes are ordered by instrument id, then by the
/// position of their phase in `phase_order`; phases missing from
/// `phase_order` follow in first-appearance order.
pub fn build_graph(
    nodes: &[NodeFeatureVector],
    phase_order: &[String],
    policy: &EdgePolicy,
) -> Result<SurgicalGraph> {
    policy.validate()?;
    let first = nodes
        .first()
        .ok_or_else(|| Error::InvalidInput("cannot build a graph without nodes".into()))?;
    let clip_id = first.clip_id.clone();
    let width = first.features.len();

    let mut phase_rank: HashMap<&str, usize> = HashMap::new();
    for p in phase_order {
        let next = phase_rank.len();
        phase_rank.entry(p.as_str()).or_insert(next);
    }
    for node in nodes {
        let next = phase_rank.len();
        phase_rank.entry(node.phase_name.as_str()).or_insert(next);
    }

    let mut seen = HashMap::new();
    for (idx, node) in nodes.iter().enumerate() {
        if node.clip_id != clip_id {
            return Err(Error::InvalidInput(format!(
                "nodes span clips {clip_id} and {}",
                node.clip_id
            )));
        }
        if node.features.len() != width {
            return Err(Error::Shape(format!(
                "node {}/{} has {} features, expected {width}",
                node.instrument_id,
                node.phase_name,
                node.features.len()
            )));
        }
        let key = (node.instrument_id.as_str(), node.phase_name.as_str());
        if seen.insert(key, idx).is_some() {
            return Err(Error::InvalidInput(format!(
                "duplicate node {}/{} in clip {clip_id}",
                key.0, key.1
            )));
        }
    }

    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|&a, &b| {
        let (na, nb) = (&nodes[a], &nodes[b]);
        na.instrument_id
            .cmp(&nb.instrument_id)
            .then(phase_rank[na.phase_name.as_str()].cmp(&phase_rank[nb.phase_name.as_str()]))
    });

    let n = order.len();
    let mut features = Array2::zeros((n, width));
    let mut node_ids = Vec::with_capacity(n);
    for (row, &idx) in order.iter().enumerate() {
        let node = &nodes[idx];
        for (c, v) in node.features.iter().enumerate() {
            features[[row, c]] = *v;
        }
        node_ids.push(NodeId {
            instrument_id: node.instrument_id.clone(),
            phase_name: node.phase_name.clone(),
        });
    }

    let mut adjacency = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (&node_ids[i], &node_ids[j]);
            let same_instrument = a.instrument_id == b.instrument_id;
            let same_phase = a.phase_name == b.phase_name;
            debug_assert!(!(same_instrument && same_phase));
            let ra = phase_rank[a.phase_name.as_str()];
            let rb = phase_rank[b.phase_name.as_str()];
            let mut w = 0.0;
            if same_instrument && ra.abs_diff(rb) == 1 {
                w += policy.temporal_weight;
            }
            if !same_instrument && same_phase {
                w += policy.cooccurrence_weight;
            }
            adjacency[[i, j]] = w;
            adjacency[[j, i]] = w;
        }
    }

    Ok(SurgicalGraph {
        clip_id,
        mode: Mode::TwoD,
        feature_schema: first.schema.clone(),
        node_ids,
        features,
        adjacency,
        labels: BTreeMap::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FEATURE_SCHEMA_ID;

    fn node(instr: &str, phase: &str) -> NodeFeatureVector {
        NodeFeatureVector {
            clip_id: "c".into(),
            instrument_id: instr.into(),
            phase_name: phase.into(),
            schema: FEATURE_SCHEMA_ID.into(),
            features: vec![1.0, 2.0],
        }
    }

    fn phases() -> Vec<String> {
        vec!["calot".into(), "dissection".into()]
    }

    #[test]
    fn one_instrument_two_phases() {
        let g = build_graph(
            &[node("grasper", "dissection"), node("grasper", "calot")],
            &phases(),
            &EdgePolicy::default(),
        )
        .unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.node_ids[0].phase_name, "calot");
        assert_eq!(g.adjacency, ndarray::array![[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn two_instruments_one_phase() {
        let g = build_graph(
            &[node("a", "calot"), node("b", "calot")],
            &phases(),
            &EdgePolicy::default(),
        )
        .unwrap();
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn two_by_two_is_a_four_cycle() {
        let policy = EdgePolicy {
            temporal_weight: 2.0,
            cooccurrence_weight: 3.0,
        };
        let g = build_graph(
            &[
                node("a", "calot"),
                node("a", "dissection"),
                node("b", "calot"),
                node("b", "dissection"),
            ],
            &phases(),
            &policy,
        )
        .unwrap();
        assert_eq!(g.len(), 4);
        let temporal = g.adjacency.iter().filter(|w| **w == 2.0).count() / 2;
        let cooc = g.adjacency.iter().filter(|w| **w == 3.0).count() / 2;
        assert_eq!((temporal, cooc), (2, 2));
        for row in g.adjacency.rows() {
            assert_eq!(row.iter().filter(|w| **w > 0.0).count(), 2);
        }
    }

    #[test]
    fn non_consecutive_phases_are_not_linked() {
        let order = vec!["p1".to_string(), "p2".into(), "p3".into()];
        let g = build_graph(
            &[node("a", "p1"), node("a", "p3")],
            &order,
            &EdgePolicy::default(),
        )
        .unwrap();
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn duplicate_keys_rejected() {
        let err = build_graph(
            &[node("a", "calot"), node("a", "calot")],
            &phases(),
            &EdgePolicy::default(),
        );
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn policy_needs_a_positive_weight() {
        let policy = EdgePolicy {
            temporal_weight: 0.0,
            cooccurrence_weight: 0.0,
        };
        assert!(build_graph(&[node("a", "calot")], &phases(), &policy).is_err());
    }
}
