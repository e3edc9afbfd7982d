//! Versioned JSON checkpoints. Arrays are stored row-major next to their
//! shapes.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{GatLayerParams, GnnModel, LinearHead};
use crate::canonical::{read_json, write_json};
use crate::dataio::OrdinalScale;
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    /// `[out, in]`.
    pub shape: [usize; 2],
    pub weight: Vec<f64>,
    pub att_src: Vec<f64>,
    pub att_dst: Vec<f64>,
    pub leaky_slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadRecord {
    /// `[classes, embed]`.
    pub shape: [usize; 2],
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelCheckpoint {
    pub schema_version: u32,
    pub feature_schema: String,
    /// Raw feature width; the encoder input is `raw_dim + spectral_k`.
    pub raw_dim: usize,
    pub spectral_k: usize,
    pub num_classes: usize,
    /// Scoring category of the head, absent for a pretrained encoder.
    pub category: Option<String>,
    pub ordinal_scale: OrdinalScale,
    pub decoder_scale: f64,
    pub layer1: LayerRecord,
    pub layer2: LayerRecord,
    pub head: HeadRecord,
}

fn layer_record(p: &GatLayerParams) -> LayerRecord {
    LayerRecord {
        shape: [p.out_dim(), p.in_dim()],
        weight: p.weight.iter().copied().collect(),
        att_src: p.att_src.to_vec(),
        att_dst: p.att_dst.to_vec(),
        leaky_slope: p.leaky_slope,
    }
}

fn layer_params(r: &LayerRecord, name: &str) -> Result<GatLayerParams> {
    let weight = Array2::from_shape_vec(r.shape, r.weight.clone())
        .map_err(|e| Error::Shape(format!("{name}.weight: {e}")))?;
    if r.att_src.len() != r.shape[0] || r.att_dst.len() != r.shape[0] {
        return Err(Error::Shape(format!(
            "{name}: attention vectors do not match width {}",
            r.shape[0]
        )));
    }
    Ok(GatLayerParams {
        weight,
        att_src: Array1::from(r.att_src.clone()),
        att_dst: Array1::from(r.att_dst.clone()),
        leaky_slope: r.leaky_slope,
    })
}

impl ModelCheckpoint {
    pub fn from_model(
        model: &GnnModel,
        feature_schema: &str,
        spectral_k: usize,
        category: Option<&str>,
        ordinal_scale: OrdinalScale,
    ) -> Self {
        Self {
            schema_version: CHECKPOINT_VERSION,
            feature_schema: feature_schema.to_string(),
            raw_dim: model.in_dim().saturating_sub(spectral_k),
            spectral_k,
            num_classes: model.num_classes(),
            category: category.map(str::to_string),
            ordinal_scale,
            decoder_scale: model.decoder_scale,
            layer1: layer_record(&model.layer1),
            layer2: layer_record(&model.layer2),
            head: HeadRecord {
                shape: [model.head.weight.nrows(), model.head.weight.ncols()],
                weight: model.head.weight.iter().copied().collect(),
                bias: model.head.bias.to_vec(),
            },
        }
    }

    pub fn to_model(&self) -> Result<GnnModel> {
        if self.schema_version != CHECKPOINT_VERSION {
            return Err(Error::Validation(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                self.schema_version
            )));
        }
        let head = LinearHead {
            weight: Array2::from_shape_vec(self.head.shape, self.head.weight.clone())
                .map_err(|e| Error::Shape(format!("head.weight: {e}")))?,
            bias: Array1::from(self.head.bias.clone()),
        };
        let model = GnnModel {
            layer1: layer_params(&self.layer1, "layer1")?,
            layer2: layer_params(&self.layer2, "layer2")?,
            head,
            decoder_scale: self.decoder_scale,
        };
        model.validate()?;
        if model.in_dim() != self.raw_dim + self.spectral_k
            || model.num_classes() != self.num_classes
        {
            return Err(Error::Shape(format!(
                "checkpoint declares {}+{} inputs and {} classes, arrays give {} and {}",
                self.raw_dim,
                self.spectral_k,
                self.num_classes,
                model.in_dim(),
                model.num_classes()
            )));
        }
        Ok(model)
    }

    /// Fails with [`Error::SchemaMismatch`] unless the dataset's feature
    /// schema and width match.
    pub fn check_schema(&self, feature_schema: &str, raw_dim: usize) -> Result<()> {
        if self.feature_schema != feature_schema || self.raw_dim != raw_dim {
            return Err(Error::SchemaMismatch {
                checkpoint: format!("{} ({} features)", self.feature_schema, self.raw_dim),
                dataset: format!("{feature_schema} ({raw_dim} features)"),
            });
        }
        Ok(())
    }
}

pub fn save_checkpoint(path: &Path, checkpoint: &ModelCheckpoint) -> Result<()> {
    write_json(path, checkpoint)
}

pub fn load_checkpoint(path: &Path) -> Result<ModelCheckpoint> {
    let ckpt: ModelCheckpoint = read_json(path)?;
    ckpt.to_model()?;
    Ok(ckpt)
}
