use rand_distr::{Distribution, Normal};

use super::metrics::{kendall_tau, pearson, prf1, spearman};
use super::MetricsReport;
use crate::dataio::OrdinalScale;
use crate::{seeded_rng, Error, Result};

/// Random baseline: each run draws one Gaussian prediction per sample with
/// the truth's mean and (population) standard deviation, using the subseed
/// `seed + run`. Correlations use the raw draws; classification metrics use
/// draws rounded and clamped to the scale. Metrics are averaged over runs.
pub fn gaussian_baseline(
    truth: &[i64],
    scale: &OrdinalScale,
    runs: usize,
    seed: u64,
) -> Result<MetricsReport> {
    if runs == 0 {
        return Err(Error::InvalidInput(
            "baseline needs at least one run".into(),
        ));
    }
    if truth.len() < 2 {
        return Err(Error::InvalidInput(
            "baseline needs at least 2 samples".into(),
        ));
    }
    let t: Vec<f64> = truth.iter().map(|&v| v as f64).collect();
    let n = t.len() as f64;
    let mean = t.iter().sum::<f64>() / n;
    let std = (t.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if std == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let normal = Normal::new(mean, std).map_err(|e| Error::InvalidInput(e.to_string()))?;

    let mut sums = [0.0; 6];
    for run in 0..runs {
        let mut rng = seeded_rng(seed.wrapping_add(run as u64));
        let draws: Vec<f64> = (0..truth.len()).map(|_| normal.sample(&mut rng)).collect();
        let classes: Vec<i64> = draws
            .iter()
            .map(|d| (d.round() as i64).clamp(scale.min, scale.max))
            .collect();
        let (p, r, f) = prf1(&classes, truth)?;
        let vals = [
            pearson(&draws, &t)?,
            spearman(&draws, &t)?,
            kendall_tau(&draws, &t)?,
            p,
            r,
            f,
        ];
        for (s, v) in sums.iter_mut().zip(vals) {
            *s += v;
        }
    }
    let avg = sums.map(|s| s / runs as f64);
    Ok(MetricsReport {
        method: "gaussian-baseline".into(),
        category: String::new(),
        mode: None,
        n: truth.len(),
        pearson: avg[0],
        spearman: avg[1],
        kendall: avg[2],
        precision: avg[3],
        recall: avg[4],
        f1: avg[5],
        degenerate: false,
        runs,
    })
}
