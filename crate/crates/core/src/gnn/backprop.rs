//! Full forward pass with caches and the matching backward pass.

use ndarray::{Array1, Array2, Axis};

use super::layer::{self, GatCache, Neighborhood};
use super::loss::{self, cross_entropy_loss, global_mean_pool, softmax, spectral_loss};
use super::{GnnGradients, GnnModel, GraphInput};
use crate::{Error, Result};

/// What the loss compares the model output against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target<'a> {
    /// Reconstruct this normalized Laplacian (normally the unmasked graph's).
    Spectral(&'a Array2<f64>),
    /// Cross-entropy against a class index.
    Class(usize),
    /// `cross_entropy + spectral_weight · spectral`.
    Joint {
        label: usize,
        laplacian: &'a Array2<f64>,
        spectral_weight: f64,
    },
}

pub(crate) struct Encoded {
    nbr: Neighborhood,
    cache1: GatCache,
    cache2: GatCache,
    pub embeddings: Array2<f64>,
}

pub(crate) fn encode(model: &GnnModel, input: &GraphInput) -> Result<Encoded> {
    if input.features.ncols() != model.in_dim() {
        return Err(Error::Shape(format!(
            "model expects {} input features, graph provides {}",
            model.in_dim(),
            input.features.ncols()
        )));
    }
    let nbr = Neighborhood::from_adjacency(&input.adjacency);
    let (h1, cache1) = layer::forward(&model.layer1, &input.features, &nbr)?;
    let (embeddings, cache2) = layer::forward(&model.layer2, &h1, &nbr)?;
    Ok(Encoded {
        nbr,
        cache1,
        cache2,
        embeddings,
    })
}

fn class_terms(
    model: &GnnModel,
    z: &Array2<f64>,
    label: usize,
    grads: &mut GnnGradients,
) -> Result<(f64, Array2<f64>)> {
    let pooled = global_mean_pool(z)?;
    let logits = loss::classify(&pooled, &model.head)?;
    let value = cross_entropy_loss(&logits, label)?;
    let mut d_logits = softmax(&logits);
    d_logits[label] -= 1.0;
    let d_logits_col = d_logits.view().insert_axis(Axis(1));
    grads.head_weight += &d_logits_col.dot(&pooled.view().insert_axis(Axis(0)));
    grads.head_bias += &d_logits;
    let d_pooled: Array1<f64> = model.head.weight.t().dot(&d_logits) / z.nrows() as f64;
    let d_z = Array2::from_shape_fn(z.raw_dim(), |(_, k)| d_pooled[k]);
    Ok((value, d_z))
}

fn spectral_terms(
    model: &GnnModel,
    z: &Array2<f64>,
    target: &Array2<f64>,
) -> Result<(f64, Array2<f64>)> {
    if target.dim() != (z.nrows(), z.nrows()) {
        return Err(Error::Shape(format!(
            "target Laplacian is {:?} for {} nodes",
            target.dim(),
            z.nrows()
        )));
    }
    let decoded = loss::decode(z, model.decoder_scale)?;
    let value = spectral_loss(target, &decoded.laplacian)?;
    let d_lap = loss::spectral_loss_grad(target, &decoded.laplacian);
    let d_z = loss::decode_backward(z, model.decoder_scale, &decoded, &d_lap);
    Ok((value, d_z))
}

/// Loss and exact gradients for every parameter block.
///
/// The spectral term never touches the head, so its head gradients are zero.
pub fn forward_backward(
    model: &GnnModel,
    input: &GraphInput,
    target: Target<'_>,
) -> Result<(f64, GnnGradients)> {
    let enc = encode(model, input)?;
    let z = &enc.embeddings;
    let mut grads = GnnGradients::zeros_like(model);
    let check_label = |label: usize| {
        if label >= model.num_classes() {
            Err(Error::InvalidInput(format!(
                "label {label} out of range for {} classes",
                model.num_classes()
            )))
        } else {
            Ok(())
        }
    };
    let (value, d_z) = match target {
        Target::Spectral(lap) => spectral_terms(model, z, lap)?,
        Target::Class(label) => {
            check_label(label)?;
            class_terms(model, z, label, &mut grads)?
        }
        Target::Joint {
            label,
            laplacian,
            spectral_weight,
        } => {
            check_label(label)?;
            let (ce, mut d_z) = class_terms(model, z, label, &mut grads)?;
            if spectral_weight != 0.0 {
                let (sp, d_sp) = spectral_terms(model, z, laplacian)?;
                d_z.scaled_add(spectral_weight, &d_sp);
                (ce + spectral_weight * sp, d_z)
            } else {
                (ce, d_z)
            }
        }
    };
    if !value.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    let d_h1 = layer::backward(
        &model.layer2,
        &enc.cache2,
        &enc.nbr,
        &d_z,
        &mut grads.layer2,
    );
    layer::backward(
        &model.layer1,
        &enc.cache1,
        &enc.nbr,
        &d_h1,
        &mut grads.layer1,
    );
    Ok((value, grads))
}

/// Loss only (no gradients).
pub fn loss_value(model: &GnnModel, input: &GraphInput, target: Target<'_>) -> Result<f64> {
    let z = encode(model, input)?.embeddings;
    let mut scratch = GnnGradients::zeros_like(model);
    let value = match target {
        Target::Spectral(lap) => spectral_terms(model, &z, lap)?.0,
        Target::Class(label) => class_terms(model, &z, label, &mut scratch)?.0,
        Target::Joint {
            label,
            laplacian,
            spectral_weight,
        } => {
            let ce = class_terms(model, &z, label, &mut scratch)?.0;
            if spectral_weight != 0.0 {
                ce + spectral_weight * spectral_terms(model, &z, laplacian)?.0
            } else {
                ce
            }
        }
    };
    Ok(value)
}
