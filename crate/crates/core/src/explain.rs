//! Embedding export, PCA projection and nearest-exemplar lookup.

use std::io::Write;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataio::Split;
use crate::gnn::{global_mean_pool, GraphInput, ModelCheckpoint};
use crate::graph::{symmetric_eigendecomposition, GraphSet, JacobiOptions};
use crate::{Error, Result};

/// Node id used for the pooled graph-level row.
pub const GRAPH_ROW: &str = "GRAPH";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRow {
    pub clip_id: String,
    /// `instrument/phase`, or [`GRAPH_ROW`].
    pub node_id: String,
    pub vector: Vec<f64>,
    pub label: Option<i64>,
}

impl EmbeddingRow {
    pub fn is_graph(&self) -> bool {
        self.node_id == GRAPH_ROW
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub rows: Vec<EmbeddingRow>,
}

impl EmbeddingTable {
    pub fn graph_rows(&self) -> EmbeddingTable {
        EmbeddingTable {
            rows: self.rows.iter().filter(|r| r.is_graph()).cloned().collect(),
        }
    }

    pub fn matrix(&self) -> Result<Array2<f64>> {
        let d = self.rows.first().map_or(0, |r| r.vector.len());
        if self.rows.iter().any(|r| r.vector.len() != d) {
            return Err(Error::Shape("embedding rows differ in length".into()));
        }
        let flat: Vec<f64> = self
            .rows
            .iter()
            .flat_map(|r| r.vector.iter().copied())
            .collect();
        Array2::from_shape_vec((self.rows.len(), d), flat).map_err(|e| Error::Shape(e.to_string()))
    }
}

/// For each clip of `split` (all clips when `None`), in index order: one row
/// per node after the second attention layer, then the pooled graph row.
/// Labels come from `category` when given.
pub fn export_embeddings(
    checkpoint: &ModelCheckpoint,
    set: &GraphSet,
    split: Option<Split>,
    category: Option<&str>,
) -> Result<EmbeddingTable> {
    checkpoint.check_schema(&set.index.feature_schema, set.index.feature_names.len())?;
    let model = checkpoint.to_model()?;
    let mut rows = Vec::new();
    for (entry, g) in set.index.graphs.iter().zip(&set.graphs) {
        if split.is_some_and(|s| s != entry.split) {
            continue;
        }
        let input = GraphInput::from_graph(g, checkpoint.spectral_k)?;
        let z = model.embed(&input)?;
        let label = category.and_then(|c| g.labels.get(c).copied());
        for (id, row) in g.node_ids.iter().zip(z.axis_iter(Axis(0))) {
            rows.push(EmbeddingRow {
                clip_id: g.clip_id.clone(),
                node_id: id.to_string(),
                vector: row.to_vec(),
                label,
            });
        }
        rows.push(EmbeddingRow {
            clip_id: g.clip_id.clone(),
            node_id: GRAPH_ROW.into(),
            vector: global_mean_pool(&z)?.to_vec(),
            label,
        });
    }
    Ok(EmbeddingTable { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedRow {
    pub clip_id: String,
    pub node_id: String,
    pub coords: Vec<f64>,
    pub label: Option<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub rows: Vec<ProjectedRow>,
    /// Column means removed before projecting.
    pub mean: Array1<f64>,
    /// `dim x d`, one unit-norm principal axis per row, sign-fixed so the
    /// largest-magnitude loading is positive.
    pub components: Array2<f64>,
    /// Variance share of every component (all `d`), descending.
    pub explained_variance_ratio: Vec<f64>,
}

/// Principal component projection of every row onto the top `dim` axes of
/// the sample covariance.
pub fn pca_project(table: &EmbeddingTable, dim: usize) -> Result<Projection> {
    if table.rows.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "projection needs at least 2 rows, got {}",
            table.rows.len()
        )));
    }
    let x = table.matrix()?;
    let (n, d) = x.dim();
    if dim < 1 || dim > d {
        return Err(Error::InvalidInput(format!(
            "projection dimension {dim} not in 1..={d}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("embeddings".into()));
    }
    let mean = x.mean_axis(Axis(0)).expect("n >= 2");
    let centered = &x - &mean;
    let mut cov = centered.t().dot(&centered) / (n - 1) as f64;
    // Exact symmetry for the solver.
    for i in 0..d {
        for j in (i + 1)..d {
            let s = 0.5 * (cov[[i, j]] + cov[[j, i]]);
            cov[[i, j]] = s;
            cov[[j, i]] = s;
        }
    }
    let eig = symmetric_eigendecomposition(&cov, JacobiOptions::default())?;
    let values: Vec<f64> = eig.eigenvalues.iter().rev().map(|v| v.max(0.0)).collect();
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let components = Array2::from_shape_fn((dim, d), |(c, k)| eig.eigenvectors[[k, d - 1 - c]]);
    let coords = centered.dot(&components.t());
    let rows = table
        .rows
        .iter()
        .zip(coords.axis_iter(Axis(0)))
        .map(|(r, c)| ProjectedRow {
            clip_id: r.clip_id.clone(),
            node_id: r.node_id.clone(),
            coords: c.to_vec(),
            label: r.label,
        })
        .collect();
    Ok(Projection {
        rows,
        mean,
        components,
        explained_variance_ratio: values.iter().map(|v| v / total).collect(),
    })
}

/// The `k` graph rows closest to `query`'s graph row (Euclidean), excluding
/// the query itself; ties by clip id.
pub fn nearest_exemplars(
    query: &str,
    table: &EmbeddingTable,
    k: usize,
) -> Result<Vec<(String, f64)>> {
    if k < 1 {
        return Err(Error::InvalidInput("k must be >= 1".into()));
    }
    let graphs: Vec<&EmbeddingRow> = table.rows.iter().filter(|r| r.is_graph()).collect();
    let q = graphs
        .iter()
        .find(|r| r.clip_id == query)
        .ok_or_else(|| Error::InvalidInput(format!("unknown clip {query}")))?;
    let mut ranked: Vec<(String, f64)> = graphs
        .iter()
        .filter(|r| r.clip_id != query)
        .map(|r| {
            let d2: f64 = r
                .vector
                .iter()
                .zip(&q.vector)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (r.clip_id.clone(), d2.sqrt())
        })
        .collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(k);
    Ok(ranked)
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Validation(format!("writing CSV: {e}"))
}

/// `clip_id,node_id,e0..e{d-1},label`.
pub fn write_embeddings_csv<W: Write>(writer: W, table: &EmbeddingTable) -> Result<()> {
    let mut w = csv_writer(writer);
    let d = table.rows.first().map_or(0, |r| r.vector.len());
    let mut header = vec!["clip_id".to_string(), "node_id".to_string()];
    header.extend((0..d).map(|k| format!("e{k}")));
    header.push("label".into());
    w.write_record(&header).map_err(csv_err)?;
    for r in &table.rows {
        let mut rec = vec![r.clip_id.clone(), r.node_id.clone()];
        rec.extend(r.vector.iter().map(|v| v.to_string()));
        rec.push(r.label.map(|l| l.to_string()).unwrap_or_default());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

/// Reads a table written by [`write_embeddings_csv`].
pub fn read_embeddings_csv<R: std::io::Read>(
    reader: R,
    path: &std::path::Path,
) -> Result<EmbeddingTable> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::schema(path, "header", e.to_string()))?
        .clone();
    let width = headers.len();
    if width < 4
        || &headers[0] != "clip_id"
        || &headers[1] != "node_id"
        || &headers[width - 1] != "label"
    {
        return Err(Error::schema(
            path,
            "header",
            "expected clip_id,node_id,e0..,label",
        ));
    }
    let mut rows = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let row = idx + 1;
        let bad = |message: String| Error::Row {
            path: path.into(),
            row,
            message,
        };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let vector = (2..width - 1)
            .map(|c| {
                rec[c]
                    .parse::<f64>()
                    .map_err(|_| bad(format!("cannot parse `{}`", &rec[c])))
            })
            .collect::<Result<Vec<_>>>()?;
        let label = match rec[width - 1].trim() {
            "" => None,
            l => Some(
                l.parse::<i64>()
                    .map_err(|_| bad(format!("cannot parse label `{l}`")))?,
            ),
        };
        rows.push(EmbeddingRow {
            clip_id: rec[0].to_string(),
            node_id: rec[1].to_string(),
            vector,
            label,
        });
    }
    Ok(EmbeddingTable { rows })
}

/// `clip_id,node_id,pc1..pc{dim},label`.
pub fn write_projection_csv<W: Write>(writer: W, projection: &Projection) -> Result<()> {
    let mut w = csv_writer(writer);
    let dim = projection.components.nrows();
    let mut header = vec!["clip_id".to_string(), "node_id".to_string()];
    header.extend((1..=dim).map(|k| format!("pc{k}")));
    header.push("label".into());
    w.write_record(&header).map_err(csv_err)?;
    for r in &projection.rows {
        let mut rec = vec![r.clip_id.clone(), r.node_id.clone()];
        rec.extend(r.coords.iter().map(|v| v.to_string()));
        rec.push(r.label.map(|l| l.to_string()).unwrap_or_default());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}
