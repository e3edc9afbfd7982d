//! Rank correlations, macro precision/recall/F1, the Gaussian random
//! baseline and whole-model evaluation.

mod baseline;
mod metrics;

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canonical::{read_json, write_json};
use crate::dataio::{Mode, Split};
use crate::gnn::{GraphInput, ModelCheckpoint};
use crate::graph::GraphSet;
use crate::train::category_labels;
use crate::{Error, Result};

pub use baseline::gaussian_baseline;
pub use metrics::{average_ranks, kendall_tau, pearson, prf1, spearman};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// What produced the predictions, e.g. `surgnn` or `gaussian-baseline`.
    pub method: String,
    pub category: String,
    /// Set when every evaluated clip shares one mode.
    pub mode: Option<Mode>,
    pub n: usize,
    pub pearson: f64,
    pub spearman: f64,
    pub kendall: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// A correlation was undefined (constant predictions or truth) and is
    /// reported as 0.
    pub degenerate: bool,
    /// Number of averaged runs (1 for a model evaluation).
    pub runs: usize,
}

impl MetricsReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

/// Aligned text table in the column order Pearson, Spearman, Kendall,
/// Precision, Recall, F1.
pub fn format_table(reports: &[MetricsReport]) -> String {
    let header = [
        "Method",
        "Category",
        "Mode",
        "N",
        "Pearson",
        "Spearman",
        "Kendall",
        "Precision",
        "Recall",
        "F1",
    ];
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let mut row = vec![
                r.method.clone(),
                r.category.clone(),
                r.mode.map(|m| m.to_string()).unwrap_or_else(|| "-".into()),
                r.n.to_string(),
            ];
            row.extend(
                [
                    r.pearson,
                    r.spearman,
                    r.kendall,
                    r.precision,
                    r.recall,
                    r.f1,
                ]
                .iter()
                .map(|v| format!("{v:.3}")),
            );
            row
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            rows.iter()
                .map(|r| r[c].len())
                .chain([header[c].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (s, w))| {
                if c < 3 {
                    format!("{s:<w$}")
                } else {
                    format!("{s:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(header.to_vec());
    for r in &rows {
        line(r.iter().map(String::as_str).collect());
    }
    out
}

/// Correlations and classification metrics between predicted and true
/// ordinal scores. Undefined correlations become 0 with `degenerate` set.
pub fn score_predictions(
    method: &str,
    category: &str,
    mode: Option<Mode>,
    pred: &[i64],
    truth: &[i64],
) -> Result<MetricsReport> {
    let p: Vec<f64> = pred.iter().map(|&v| v as f64).collect();
    let t: Vec<f64> = truth.iter().map(|&v| v as f64).collect();
    let mut degenerate = false;
    let mut total = |r: Result<f64>| match r {
        Ok(v) => Ok(v),
        Err(Error::ZeroVariance) => {
            degenerate = true;
            Ok(0.0)
        }
        Err(e) => Err(e),
    };
    let pearson = total(pearson(&p, &t))?;
    let spearman = total(spearman(&p, &t))?;
    let kendall = total(kendall_tau(&p, &t))?;
    let (precision, recall, f1) = prf1(pred, truth)?;
    Ok(MetricsReport {
        method: method.to_string(),
        category: category.to_string(),
        mode,
        n: pred.len(),
        pearson,
        spearman,
        kendall,
        precision,
        recall,
        f1,
        degenerate,
        runs: 1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub clip_id: String,
    pub truth: i64,
    pub predicted: i64,
}

/// Predicted and true scores for every clip of `split` (optionally only
/// clips of one mode).
pub fn predict_split(
    checkpoint: &ModelCheckpoint,
    set: &GraphSet,
    split: Split,
    category: &str,
    mode: Option<Mode>,
) -> Result<Vec<Prediction>> {
    checkpoint.check_schema(&set.index.feature_schema, set.index.feature_names.len())?;
    if let Some(c) = &checkpoint.category {
        if c != category {
            return Err(Error::InvalidInput(format!(
                "checkpoint was trained for `{c}`, not `{category}`"
            )));
        }
    }
    let model = checkpoint.to_model()?;
    let graphs: Vec<_> = set
        .split(split)
        .into_iter()
        .filter(|g| mode.is_none_or(|m| g.mode == m))
        .collect();
    if graphs.is_empty() {
        return Err(Error::InvalidInput(format!("no clips in split {split:?}")));
    }
    let scale = set.index.ordinal_scale;
    let labels = category_labels(&graphs, category, &scale)?;
    graphs
        .par_iter()
        .zip(labels.par_iter())
        .map(|(g, &label)| {
            let input = GraphInput::from_graph(g, checkpoint.spectral_k)?;
            Ok(Prediction {
                clip_id: g.clip_id.clone(),
                truth: scale.score_of(label),
                predicted: scale.score_of(model.predict(&input)?),
            })
        })
        .collect()
}

/// Evaluates a trained classifier on one split.
pub fn evaluate_model(
    checkpoint: &ModelCheckpoint,
    set: &GraphSet,
    split: Split,
    category: &str,
    mode: Option<Mode>,
) -> Result<MetricsReport> {
    let preds = predict_split(checkpoint, set, split, category, mode)?;
    let modes: std::collections::BTreeSet<Mode> = set
        .split(split)
        .into_iter()
        .filter(|g| mode.is_none_or(|m| g.mode == m))
        .map(|g| g.mode)
        .collect();
    let report_mode = if modes.len() == 1 {
        modes.into_iter().next()
    } else {
        None
    };
    let pred: Vec<i64> = preds.iter().map(|p| p.predicted).collect();
    let truth: Vec<i64> = preds.iter().map(|p| p.truth).collect();
    score_predictions("surgnn", category, report_mode, &pred, &truth)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_predictions_are_degenerate() {
        let r = score_predictions("m", "Overall", None, &[3, 3, 3], &[1, 3, 5]).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.spearman, 0.0);
        let r = score_predictions("m", "Overall", None, &[1, 3, 5], &[1, 3, 5]).unwrap();
        assert!(!r.degenerate);
        assert_eq!(
            (r.pearson, r.spearman, r.kendall, r.f1),
            (1.0, 1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn table_has_columns_in_order() {
        let r = score_predictions(
            "surgnn",
            "Overall",
            Some(Mode::TwoD),
            &[1, 3, 5],
            &[1, 3, 5],
        )
        .unwrap();
        let t = format_table(&[r]);
        let header = t.lines().next().unwrap();
        let pos = |s: &str| header.find(s).unwrap();
        assert!(pos("Pearson") < pos("Spearman") && pos("Spearman") < pos("Kendall"));
        assert!(pos("Kendall") < pos("Precision") && pos("Recall") < pos("F1"));
        assert!(t.lines().nth(1).unwrap().contains("1.000"));
    }
}
