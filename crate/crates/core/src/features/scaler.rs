use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-feature z-score standardization fitted on training vectors
/// (population standard deviation). Constant features map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub constant: Vec<bool>,
}

impl FeatureScaler {
    pub fn fit<'a, I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let Some(first) = rows.first() else {
            return Err(Error::InvalidInput("empty training set".into()));
        };
        if rows.len() < 2 {
            return Err(Error::InvalidInput(
                "scaler needs at least 2 training vectors".into(),
            ));
        }
        let width = first.len();
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Shape("training vectors differ in length".into()));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; width];
        for r in &rows {
            for (m, x) in mean.iter_mut().zip(r.iter()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; width];
        for r in &rows {
            for ((v, x), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std: Vec<f64> = var.iter().map(|v| (v / n).sqrt()).collect();
        let constant = std
            .iter()
            .zip(&mean)
            .map(|(s, m)| *s <= 1e-12 * (1.0 + m.abs()))
            .collect();
        Ok(Self {
            mean,
            std,
            constant,
        })
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::Shape(format!(
                "scaler fitted on {} features, got {}",
                self.mean.len(),
                x.len()
            )));
        }
        Ok(x.iter()
            .enumerate()
            .map(|(i, v)| {
                if self.constant[i] {
                    0.0
                } else {
                    (v - self.mean[i]) / self.std[i]
                }
            })
            .collect())
    }
}
