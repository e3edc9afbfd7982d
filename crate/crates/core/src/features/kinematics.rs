//! Finite-difference kinematics with gap handling.

use crate::dataio::{InstrumentTrack, PhaseAnnotation, Sample};
use crate::{Error, Result};

use super::FeatureConfig;

/// Kinematics of one contiguous run of samples. Derivatives are first-order
/// forward differences, so `velocity`, `acceleration` and `jerk` are 1, 2
/// and 3 entries shorter than `position`.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicSeries {
    pub dim: usize,
    pub t: Vec<f64>,
    pub position: Vec<[f64; 3]>,
    pub velocity: Vec<[f64; 3]>,
    pub speed: Vec<f64>,
    pub acceleration: Vec<[f64; 3]>,
    pub jerk: Vec<[f64; 3]>,
}

pub(crate) fn norm(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn forward_diff(values: &[[f64; 3]], t: &[f64]) -> Vec<[f64; 3]> {
    values
        .windows(2)
        .zip(t.windows(2))
        .map(|(v, tt)| {
            let dt = tt[1] - tt[0];
            [
                (v[1][0] - v[0][0]) / dt,
                (v[1][1] - v[0][1]) / dt,
                (v[1][2] - v[0][2]) / dt,
            ]
        })
        .collect()
}

impl KinematicSeries {
    /// Differentiates one contiguous segment. The timestamp of each
    /// derivative sample is the left end of its interval.
    pub fn from_samples(dim: usize, t: Vec<f64>, position: Vec<[f64; 3]>) -> Result<Self> {
        if t.len() != position.len() {
            return Err(Error::Shape(format!(
                "{} timestamps for {} positions",
                t.len(),
                position.len()
            )));
        }
        if t.is_empty() {
            return Err(Error::InvalidInput("empty series".into()));
        }
        if let Some(w) = t.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(format!("zero dt at t = {}", w[0])));
        }
        if position.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("positions".into()));
        }
        let velocity = forward_diff(&position, &t);
        let acceleration = forward_diff(&velocity, &t[..t.len().saturating_sub(1)]);
        let jerk = forward_diff(&acceleration, &t[..t.len().saturating_sub(2)]);
        let speed = velocity.iter().map(norm).collect();
        Ok(Self {
            dim,
            t,
            position,
            velocity,
            speed,
            acceleration,
            jerk,
        })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Kinematics of one (instrument, phase) unit: the usable segments after gap
/// handling plus raw visibility counts.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitKinematics {
    pub dim: usize,
    pub segments: Vec<KinematicSeries>,
    pub total_samples: usize,
    pub visible_samples: usize,
}

/// Kinematics over a whole track.
pub fn compute_kinematics(track: &InstrumentTrack, cfg: &FeatureConfig) -> Result<UnitKinematics> {
    kinematics_from_samples(&track.samples, track.dim, cfg)
}

/// Kinematics over the samples of `track` that fall inside `phase`.
pub fn compute_unit_kinematics(
    track: &InstrumentTrack,
    phase: &PhaseAnnotation,
    cfg: &FeatureConfig,
) -> Result<UnitKinematics> {
    let lo = track
        .samples
        .partition_point(|s| s.frame < phase.start_frame);
    let hi = track.samples.partition_point(|s| s.frame < phase.end_frame);
    kinematics_from_samples(&track.samples[lo..hi], track.dim, cfg)
}

/// Splits samples into contiguous segments. Hidden runs of at most
/// `max_gap_frames` frames between two visible samples are linearly
/// interpolated in time; longer runs end the segment. Leading and trailing
/// hidden samples are dropped.
fn segments(samples: &[Sample], max_gap_frames: i64) -> Vec<Vec<(f64, [f64; 3])>> {
    let visible: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].visible).collect();
    let mut out = Vec::new();
    let Some(&first) = visible.first() else {
        return out;
    };
    let mut current = vec![(samples[first].t, samples[first].position)];
    for w in visible.windows(2) {
        let (a, b) = (&samples[w[0]], &samples[w[1]]);
        let gap = b.frame - a.frame - 1;
        if gap > max_gap_frames {
            out.push(std::mem::take(&mut current));
        } else {
            for s in &samples[w[0] + 1..w[1]] {
                let span = b.t - a.t;
                let u = if span > 0.0 { (s.t - a.t) / span } else { 0.0 };
                let p: [f64; 3] =
                    std::array::from_fn(|k| a.position[k] + u * (b.position[k] - a.position[k]));
                current.push((s.t, p));
            }
        }
        current.push((b.t, b.position));
    }
    out.push(current);
    out
}

fn kinematics_from_samples(
    samples: &[Sample],
    dim: usize,
    cfg: &FeatureConfig,
) -> Result<UnitKinematics> {
    let visible_samples = samples.iter().filter(|s| s.visible).count();
    let mut out = Vec::new();
    for seg in segments(samples, cfg.max_gap_frames) {
        if seg.len() < cfg.min_samples {
            continue;
        }
        let (t, position): (Vec<f64>, Vec<[f64; 3]>) = seg.into_iter().unzip();
        out.push(KinematicSeries::from_samples(dim, t, position)?);
    }
    if out.is_empty() {
        return Err(Error::InvalidInput(format!(
            "track too short: fewer than {} usable samples",
            cfg.min_samples
        )));
    }
    Ok(UnitKinematics {
        dim,
        segments: out,
        total_samples: samples.len(),
        visible_samples,
    })
}
