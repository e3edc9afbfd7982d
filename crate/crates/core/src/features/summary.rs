//! Per-unit summary statistics.

use super::kinematics::{norm, UnitKinematics};
use super::{FeatureConfig, FEATURE_COUNT};
use crate::{Error, Result};

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn std_pop(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Angle between two vectors in radians, in `[0, π]`.
fn angle(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    norm(&cross).atan2(dot)
}

/// Computes the fixed 14-entry feature vector (see
/// [`FEATURE_NAMES`](super::FEATURE_NAMES) for the order).
pub fn summarize_unit(kin: &UnitKinematics, cfg: &FeatureConfig) -> Result<[f64; FEATURE_COUNT]> {
    let segs = &kin.segments;
    if segs.is_empty() || segs.iter().all(|s| s.is_empty()) {
        return Err(Error::InvalidInput("empty series".into()));
    }

    let mut path_length = 0.0;
    let mut speeds = Vec::new();
    let mut accels = Vec::new();
    let mut jerks = Vec::new();
    let mut jerk_energy = 0.0;
    let mut turning = Vec::new();
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];

    for s in segs {
        for w in s.position.windows(2) {
            let d = [w[1][0] - w[0][0], w[1][1] - w[0][1], w[1][2] - w[0][2]];
            path_length += norm(&d);
        }
        for p in &s.position {
            for k in 0..s.dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        speeds.extend_from_slice(&s.speed);
        accels.extend(s.acceleration.iter().map(norm));
        for (i, j) in s.jerk.iter().enumerate() {
            let m = norm(j);
            jerks.push(m);
            jerk_energy += m * m * (s.t[i + 1] - s.t[i]);
        }
        for i in 0..s.velocity.len().saturating_sub(1) {
            if s.speed[i] < cfg.idle_threshold || s.speed[i + 1] < cfg.idle_threshold {
                continue;
            }
            let dt = 0.5 * (s.t[i + 2] - s.t[i]);
            turning.push(angle(&s.velocity[i], &s.velocity[i + 1]) / dt);
        }
    }

    let dim = kin.dim.min(3);
    let extent: f64 = (0..dim).map(|k| hi[k] - lo[k]).product();
    let bbox = (extent + cfg.bbox_epsilon).ln();

    let first = segs.first().expect("non-empty");
    let last = segs.last().expect("non-empty");
    let duration = last.t[last.len() - 1] - first.t[0];
    let p0 = first.position[0];
    let p1 = last.position[last.len() - 1];
    let displacement = norm(&[p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]]);
    let curvature = if displacement > 1e-12 {
        (path_length / displacement).min(cfg.curvature_cap)
    } else {
        cfg.curvature_cap
    };

    let max_speed = speeds.iter().copied().fold(0.0, f64::max);
    let idle = if speeds.is_empty() {
        1.0
    } else {
        speeds.iter().filter(|s| **s < cfg.idle_threshold).count() as f64 / speeds.len() as f64
    };
    let smoothness = if max_speed < cfg.idle_threshold || duration <= 0.0 {
        0.0
    } else {
        let dimensionless = duration.powi(3) / (max_speed * max_speed) * jerk_energy;
        -(dimensionless.max(1e-12)).ln()
    };
    let visibility = if kin.total_samples == 0 {
        0.0
    } else {
        kin.visible_samples as f64 / kin.total_samples as f64
    };

    let out = [
        path_length,
        mean(&speeds),
        std_pop(&speeds),
        max_speed,
        mean(&accels),
        std_pop(&accels),
        mean(&jerks),
        idle,
        bbox,
        duration,
        visibility,
        mean(&turning),
        curvature,
        smoothness,
    ];
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("unit features".into()));
    }
    Ok(out)
}
