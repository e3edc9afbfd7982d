//! Optimization: learning-rate schedule, Adam, self-supervised masking,
//! ADASYN balancing and the two training loops.

mod adam;
mod adasyn;
mod config;
mod mask;

use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{OrdinalScale, Split};
use crate::gnn::{forward_backward, GnnGradients, GnnModel, GraphInput, ModelCheckpoint, Target};
use crate::graph::{GraphSet, SurgicalGraph};
use crate::{seeded_rng, Error, Result, SeededRng};

pub use adam::{adam_step, AdamState};
pub use adasyn::{adasyn_balance, lift_synthetic_graph, AdasynOutput, SyntheticSample};
pub use config::{lr_schedule, TrainConfig};
pub use mask::{mask_graph, mask_graph_with_edges, masked_node_count, MaskSpec};

/// Head blocks are the last two of [`crate::gnn::BLOCK_NAMES`].
const HEAD_BLOCKS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub epoch: usize,
    pub lr: f64,
    /// Mean per-graph loss over the epoch.
    pub loss: f64,
    /// Training accuracy after the epoch (supervised runs only).
    pub accuracy: Option<f64>,
}

pub type History = Vec<HistoryRow>;

pub fn write_history_csv<W: Write>(writer: W, history: &[HistoryRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let to_err = |e: csv::Error| Error::Validation(format!("writing history: {e}"));
    w.write_record(["epoch", "lr", "loss", "accuracy"])
        .map_err(to_err)?;
    for row in history {
        let acc = row.accuracy.map(|a| a.to_string()).unwrap_or_default();
        w.write_record([
            row.epoch.to_string(),
            row.lr.to_string(),
            row.loss.to_string(),
            acc,
        ])
        .map_err(to_err)?;
    }
    w.flush()
        .map_err(|e| Error::Validation(format!("writing history: {e}")))
}

/// One training example.
struct Example {
    id: String,
    input: GraphInput,
    label: Option<usize>,
}

fn apply_update(
    model: &mut GnnModel,
    grads: &GnnGradients,
    state: &mut AdamState,
    lr: f64,
    head_only: bool,
) -> Result<()> {
    let skip = if head_only { 8 - HEAD_BLOCKS } else { 0 };
    let mut params: Vec<_> = model.blocks_mut().into_iter().skip(skip).collect();
    let g: Vec<_> = grads.blocks().into_iter().skip(skip).collect();
    adam_step(&mut params, &g, state, lr)
}

/// Runs `epochs` of minibatch Adam. `target_of` builds the (possibly masked)
/// input and target for one example; it receives the shared RNG so masking
/// draws stay in a fixed order.
fn optimize<F>(
    model: &mut GnnModel,
    examples: &[Example],
    cfg: &TrainConfig,
    rng: &mut SeededRng,
    head_only: bool,
    mut prepare: F,
) -> Result<History>
where
    F: FnMut(&Example, &mut SeededRng) -> Result<GraphInput>,
{
    let mut state = AdamState::new(cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 0..cfg.epochs {
        let lr = lr_schedule(epoch, cfg);
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let prepared = batch
                .iter()
                .map(|&i| prepare(&examples[i], rng))
                .collect::<Result<Vec<_>>>()?;
            let results: Vec<Result<(f64, GnnGradients)>> = batch
                .par_iter()
                .zip(prepared.par_iter())
                .map(|(&i, input)| {
                    let ex = &examples[i];
                    let target = match ex.label {
                        Some(label) if cfg.joint_spectral_weight > 0.0 => Target::Joint {
                            label,
                            laplacian: &ex.input.laplacian,
                            spectral_weight: cfg.joint_spectral_weight,
                        },
                        Some(label) => Target::Class(label),
                        None => Target::Spectral(&ex.input.laplacian),
                    };
                    forward_backward(model, input, target)
                })
                .collect();
            let mut total = GnnGradients::zeros_like(model);
            let scale = 1.0 / batch.len() as f64;
            for (&i, r) in batch.iter().zip(results) {
                let (loss, g) = r.map_err(|e| match e {
                    Error::NonFinite(_) => {
                        Error::NonFinite(format!("loss at epoch {epoch}, graph {}", examples[i].id))
                    }
                    other => other,
                })?;
                epoch_loss += loss;
                total.add_scaled(&g, scale);
            }
            apply_update(model, &total, &mut state, lr, head_only)?;
        }
        let accuracy = if examples.iter().all(|e| e.label.is_some()) {
            let hits: usize = examples
                .par_iter()
                .map(|e| {
                    Ok(usize::from(
                        model.predict(&e.input)? == e.label.unwrap_or(usize::MAX),
                    ))
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .sum();
            Some(hits as f64 / examples.len() as f64)
        } else {
            None
        };
        let loss = epoch_loss / examples.len() as f64;
        log::debug!("epoch {epoch}: lr {lr:e} loss {loss:.6}");
        history.push(HistoryRow {
            epoch,
            lr,
            loss,
            accuracy,
        });
    }
    Ok(history)
}

fn inputs(graphs: &[&SurgicalGraph], spectral_k: usize) -> Result<Vec<GraphInput>> {
    graphs
        .par_iter()
        .map(|g| GraphInput::from_graph(g, spectral_k))
        .collect()
}

/// Self-supervised training on the given graphs: each step masks node
/// features (and optionally edges), encodes the masked graph and
/// reconstructs the unmasked graph's normalized Laplacian.
pub fn train_ssl_graphs(
    graphs: &[&SurgicalGraph],
    num_classes: usize,
    cfg: &TrainConfig,
) -> Result<(GnnModel, History)> {
    cfg.validate()?;
    let first = graphs.first().ok_or_else(|| {
        Error::InvalidInput("self-supervised training needs at least one graph".into())
    })?;
    let inputs = inputs(graphs, cfg.spectral_k)?;
    let examples: Vec<Example> = graphs
        .iter()
        .zip(inputs)
        .map(|(g, input)| Example {
            id: g.clip_id.clone(),
            input,
            label: None,
        })
        .collect();
    let mut rng = seeded_rng(cfg.seed);
    let mut model = GnnModel::new(
        first.features.ncols() + cfg.spectral_k,
        num_classes,
        &mut rng,
    );
    let history = optimize(&mut model, &examples, cfg, &mut rng, false, |ex, rng| {
        if ex.input.len() < 2 {
            return Ok(ex.input.clone());
        }
        Ok(mask_graph_with_edges(&ex.input, cfg.mask_fraction, cfg.edge_mask_fraction, rng)?.0)
    })?;
    Ok((model, history))
}

/// Supervised training on given graphs and class indices. With `init`, the
/// encoder layers start from that model; the head is always freshly
/// initialized.
pub fn train_supervised_graphs(
    graphs: &[&SurgicalGraph],
    labels: &[usize],
    num_classes: usize,
    cfg: &TrainConfig,
    init: Option<&GnnModel>,
) -> Result<(GnnModel, History)> {
    cfg.validate()?;
    if graphs.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} graphs, {} labels",
            graphs.len(),
            labels.len()
        )));
    }
    let first = graphs.first().ok_or_else(|| {
        Error::InvalidInput("supervised training needs at least one graph".into())
    })?;
    if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
        return Err(Error::InvalidInput(format!(
            "label {bad} out of range for {num_classes} classes"
        )));
    }
    let inputs = inputs(graphs, cfg.spectral_k)?;
    let examples: Vec<Example> = graphs
        .iter()
        .zip(inputs)
        .zip(labels)
        .map(|((g, input), &label)| Example {
            id: g.clip_id.clone(),
            input,
            label: Some(label),
        })
        .collect();
    let mut rng = seeded_rng(cfg.seed);
    let mut model = GnnModel::new(
        first.features.ncols() + cfg.spectral_k,
        num_classes,
        &mut rng,
    );
    if let Some(init) = init {
        if init.in_dim() != model.in_dim() {
            return Err(Error::Shape(format!(
                "initial encoder takes {} inputs, data provides {}",
                init.in_dim(),
                model.in_dim()
            )));
        }
        model.layer1 = init.layer1.clone();
        model.layer2 = init.layer2.clone();
        model.decoder_scale = init.decoder_scale;
    }
    let history = optimize(
        &mut model,
        &examples,
        cfg,
        &mut rng,
        cfg.freeze_encoder,
        |ex, _| Ok(ex.input.clone()),
    )?;
    Ok((model, history))
}

/// Class indices of `graphs` for `category`.
pub fn category_labels(
    graphs: &[&SurgicalGraph],
    category: &str,
    scale: &OrdinalScale,
) -> Result<Vec<usize>> {
    graphs
        .iter()
        .map(|g| {
            let score = *g.labels.get(category).ok_or_else(|| {
                Error::Validation(format!("clip {} has no label for {category}", g.clip_id))
            })?;
            scale.class_of(score).ok_or_else(|| {
                Error::Validation(format!("clip {}: label {score} outside scale", g.clip_id))
            })
        })
        .collect()
}

/// Result of [`train_supervised`] beyond the checkpoint itself.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedRun {
    pub checkpoint: ModelCheckpoint,
    pub history: History,
    /// Number of synthetic training graphs added by balancing.
    pub synthetic: usize,
    pub warnings: Vec<String>,
}

/// Self-supervised pretraining on the training split of `set`.
pub fn train_ssl(set: &GraphSet, cfg: &TrainConfig) -> Result<(ModelCheckpoint, History)> {
    let graphs = set.split(Split::Train);
    let (model, history) = train_ssl_graphs(&graphs, set.num_classes(), cfg)?;
    let ckpt = ModelCheckpoint::from_model(
        &model,
        &set.index.feature_schema,
        cfg.spectral_k,
        None,
        set.index.ordinal_scale,
    );
    Ok((ckpt, history))
}

/// Trains one classifier for `category` on the training split of `set`,
/// after ADASYN balancing on pooled node features when `cfg.balance` is set.
pub fn train_supervised(
    set: &GraphSet,
    cfg: &TrainConfig,
    category: &str,
    init: Option<&ModelCheckpoint>,
) -> Result<SupervisedRun> {
    cfg.validate()?;
    if !set.index.categories.iter().any(|c| c == category) {
        return Err(Error::InvalidInput(format!(
            "unknown category `{category}` (known: {})",
            set.index.categories.join(", ")
        )));
    }
    let init_model = match init {
        Some(ckpt) => {
            ckpt.check_schema(&set.index.feature_schema, set.index.feature_names.len())?;
            if ckpt.spectral_k != cfg.spectral_k {
                return Err(Error::InvalidInput(format!(
                    "checkpoint uses spectral_k {}, config {}",
                    ckpt.spectral_k, cfg.spectral_k
                )));
            }
            Some(ckpt.to_model()?)
        }
        None => None,
    };
    let originals = set.split(Split::Train);
    let labels = category_labels(&originals, category, &set.index.ordinal_scale)?;

    let mut warnings = Vec::new();
    let mut synthetic_graphs = Vec::new();
    let mut all_labels = labels.clone();
    if cfg.balance && !originals.is_empty() {
        let pooled: Vec<Vec<f64>> = originals.iter().map(|g| g.pooled_features()).collect();
        // A dedicated stream keeps the training draws independent of how many
        // synthetics were made.
        let mut rng = seeded_rng(cfg.seed ^ 0xADA5_0000);
        let out = adasyn_balance(&pooled, &labels, cfg.adasyn_k, &mut rng)?;
        warnings.extend(out.warnings);
        for (k, s) in out.synthetic.iter().enumerate() {
            let id = format!("{}~syn{k:04}", originals[s.source].clip_id);
            synthetic_graphs.push(lift_synthetic_graph(
                originals[s.source],
                originals[s.partner],
                s.lambda,
                id,
            ));
            all_labels.push(s.class);
        }
    }
    let mut graphs = originals.clone();
    graphs.extend(synthetic_graphs.iter());
    let (model, history) = train_supervised_graphs(
        &graphs,
        &all_labels,
        set.num_classes(),
        cfg,
        init_model.as_ref(),
    )?;
    let checkpoint = ModelCheckpoint::from_model(
        &model,
        &set.index.feature_schema,
        cfg.spectral_k,
        Some(category),
        set.index.ordinal_scale,
    );
    Ok(SupervisedRun {
        checkpoint,
        history,
        synthetic: synthetic_graphs.len(),
        warnings,
    })
}
