use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::canonical::{read_json, write_json};
use crate::{Error, Result};

/// Optimization settings. Every field has a default, so a config file only
/// needs the values it overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr0: f64,
    pub decay_epochs: Vec<usize>,
    pub decay_factor: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Fraction of nodes whose raw features are zeroed in self-supervised
    /// training.
    pub mask_fraction: f64,
    /// Fraction of edges hidden from the encoder in self-supervised training.
    pub edge_mask_fraction: f64,
    pub seed: u64,
    /// Positional (Laplacian eigenvector) columns appended to node features.
    pub spectral_k: usize,
    /// Weight of the spectral term added to cross-entropy in supervised
    /// training; 0 trains on cross-entropy alone.
    pub joint_spectral_weight: f64,
    /// Only the head is updated in supervised training.
    pub freeze_encoder: bool,
    /// Oversample minority classes with ADASYN before supervised training.
    pub balance: bool,
    pub adasyn_k: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 0.0025,
            decay_epochs: vec![200, 400],
            decay_factor: 0.1,
            batch_size: 32,
            epochs: 1000,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            mask_fraction: 0.15,
            edge_mask_fraction: 0.0,
            seed: 0,
            spectral_k: 4,
            joint_spectral_weight: 0.0,
            freeze_encoder: false,
            balance: true,
            adasyn_k: 7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if !(self.lr0.is_finite() && self.lr0 > 0.0) {
            return bad("lr0 must be positive");
        }
        if !(self.decay_factor.is_finite() && self.decay_factor > 0.0) {
            return bad("decay_factor must be positive");
        }
        if !(0.0..1.0).contains(&self.mask_fraction) {
            return bad("mask_fraction must be in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.edge_mask_fraction) {
            return bad("edge_mask_fraction must be in [0, 1)");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be >= 1");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam betas must be in [0, 1)");
        }
        if self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            return bad("adam_eps must be positive");
        }
        if !(self.joint_spectral_weight.is_finite() && self.joint_spectral_weight >= 0.0) {
            return bad("joint_spectral_weight must be >= 0");
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

/// `lr0 · decay_factor^(number of decay epochs ≤ epoch)`.
pub fn lr_schedule(epoch: usize, config: &TrainConfig) -> f64 {
    let decays = config.decay_epochs.iter().filter(|&&d| d <= epoch).count();
    config.lr0 * config.decay_factor.powi(decays as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn schedule_steps() {
        let cfg = TrainConfig::default();
        assert_eq!(lr_schedule(0, &cfg), 0.0025);
        assert_eq!(lr_schedule(199, &cfg), 0.0025);
        assert_relative_eq!(lr_schedule(200, &cfg), 0.00025, max_relative = 1e-12);
        assert_relative_eq!(lr_schedule(399, &cfg), 0.00025, max_relative = 1e-12);
        assert_relative_eq!(lr_schedule(999, &cfg), 0.000025, max_relative = 1e-12);
        let mut prev = f64::INFINITY;
        for e in 0..1200 {
            let lr = lr_schedule(e, &cfg);
            assert!(lr <= prev);
            prev = lr;
        }
    }

    #[test]
    fn partial_config_file_uses_defaults() {
        let cfg: TrainConfig = serde_json::from_str(r#"{"epochs": 300, "seed": 7}"#).unwrap();
        assert_eq!(cfg.epochs, 300);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.batch_size, 32);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"epoch": 3}"#).is_err());
        let bad = TrainConfig {
            mask_fraction: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
