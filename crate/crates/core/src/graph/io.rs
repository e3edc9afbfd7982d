//! Graph JSON files and the graph-set index.
//!
//! A graph file holds `node_ids`, row-major `X`, the upper triangle of `A` as
//! `[i, j, w]` triples and the clip's `labels`. A graph set is a directory
//! with `index.json` listing every graph file and its split.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{NodeId, SurgicalGraph};
use crate::canonical::{read_json, write_json};
use crate::dataio::{Mode, OrdinalScale, Split};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub clip_id: String,
    pub mode: Mode,
    pub feature_schema: String,
    pub node_ids: Vec<(String, String)>,
    #[serde(rename = "X")]
    pub x: Vec<Vec<f64>>,
    #[serde(rename = "A")]
    pub a: Vec<(usize, usize, f64)>,
    #[serde(default)]
    pub labels: BTreeMap<String, i64>,
}

impl From<&SurgicalGraph> for GraphFile {
    fn from(g: &SurgicalGraph) -> Self {
        let n = g.len();
        let mut a = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let w = g.adjacency[[i, j]];
                if w != 0.0 {
                    a.push((i, j, w));
                }
            }
        }
        GraphFile {
            clip_id: g.clip_id.clone(),
            mode: g.mode,
            feature_schema: g.feature_schema.clone(),
            node_ids: g
                .node_ids
                .iter()
                .map(|id| (id.instrument_id.clone(), id.phase_name.clone()))
                .collect(),
            x: g.features.rows().into_iter().map(|r| r.to_vec()).collect(),
            a,
            labels: g.labels.clone(),
        }
    }
}

impl GraphFile {
    pub fn into_graph(self, path: &Path) -> Result<SurgicalGraph> {
        let n = self.node_ids.len();
        if self.x.len() != n {
            return Err(Error::schema(
                path,
                "X",
                format!("{} rows for {n} nodes", self.x.len()),
            ));
        }
        let width = self.x.first().map_or(0, Vec::len);
        let mut features = Array2::zeros((n, width));
        for (i, row) in self.x.iter().enumerate() {
            if row.len() != width {
                return Err(Error::schema(
                    path,
                    format!("X[{i}]"),
                    "ragged feature rows",
                ));
            }
            for (j, v) in row.iter().enumerate() {
                features[[i, j]] = *v;
            }
        }
        let mut adjacency = Array2::zeros((n, n));
        for (k, &(i, j, w)) in self.a.iter().enumerate() {
            if i >= n || j >= n || i == j {
                return Err(Error::schema(
                    path,
                    format!("A[{k}]"),
                    "edge endpoint out of range",
                ));
            }
            adjacency[[i, j]] = w;
            adjacency[[j, i]] = w;
        }
        let graph = SurgicalGraph {
            clip_id: self.clip_id,
            mode: self.mode,
            feature_schema: self.feature_schema,
            node_ids: self
                .node_ids
                .into_iter()
                .map(|(instrument_id, phase_name)| NodeId {
                    instrument_id,
                    phase_name,
                })
                .collect(),
            features,
            adjacency,
            labels: self.labels,
        };
        graph
            .validate()
            .map_err(|e| Error::schema(path, "graph", e.to_string()))?;
        Ok(graph)
    }
}

pub fn save_graph(path: &Path, graph: &SurgicalGraph) -> Result<()> {
    write_json(path, &GraphFile::from(graph))
}

pub fn load_graph(path: &Path) -> Result<SurgicalGraph> {
    let file: GraphFile = read_json(path)?;
    file.into_graph(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEntry {
    pub clip_id: String,
    pub split: Split,
    /// Relative to the index file's directory.
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphIndex {
    pub feature_schema: String,
    pub feature_names: Vec<String>,
    pub categories: Vec<String>,
    pub ordinal_scale: OrdinalScale,
    pub graphs: Vec<GraphEntry>,
}

/// An index plus every graph it references, in index order.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSet {
    pub index: GraphIndex,
    pub graphs: Vec<SurgicalGraph>,
}

impl GraphSet {
    pub fn split(&self, split: Split) -> Vec<&SurgicalGraph> {
        self.index
            .graphs
            .iter()
            .zip(&self.graphs)
            .filter(|(e, _)| e.split == split)
            .map(|(_, g)| g)
            .collect()
    }

    pub fn num_classes(&self) -> usize {
        self.index.ordinal_scale.len()
    }
}

fn index_path(dir: &Path) -> PathBuf {
    if dir.extension().is_some_and(|e| e == "json") {
        dir.to_path_buf()
    } else {
        dir.join("index.json")
    }
}

/// Loads `dir/index.json` (or the given index file) and every listed graph.
pub fn load_graph_set(dir: &Path) -> Result<GraphSet> {
    let path = index_path(dir);
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let index: GraphIndex = read_json(&path)?;
    let mut graphs = Vec::with_capacity(index.graphs.len());
    for (k, entry) in index.graphs.iter().enumerate() {
        let gpath = base.join(&entry.path);
        if !gpath.exists() {
            return Err(Error::schema(
                &path,
                format!("graphs[{k}].path"),
                format!("missing graph file {}", gpath.display()),
            ));
        }
        let g = load_graph(&gpath)?;
        if g.feature_schema != index.feature_schema {
            return Err(Error::SchemaMismatch {
                checkpoint: index.feature_schema.clone(),
                dataset: g.feature_schema,
            });
        }
        graphs.push(g);
    }
    Ok(GraphSet { index, graphs })
}

/// Writes every graph to `dir/<clip_id>.json` and the index to
/// `dir/index.json`. Entry paths in `set.index` are rewritten to match.
pub fn save_graph_set(dir: &Path, set: &GraphSet) -> Result<()> {
    let mut index = set.index.clone();
    for (entry, graph) in index.graphs.iter_mut().zip(&set.graphs) {
        entry.path = format!("{}.json", graph.clip_id);
        save_graph(&dir.join(&entry.path), graph)?;
    }
    write_json(&dir.join("index.json"), &index)
}
