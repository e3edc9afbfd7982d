//! Deterministic synthetic trajectory datasets with a controllable skill
//! signal.
//!
//! Each clip has a latent skill `s ∈ [0, 1]` (novice ≈ 0, intermediate ≈ 0.5,
//! expert ≈ 1). Every instrument moves between random waypoints in each
//! phase along a curve parameterized by progress `τ ∈ [0, 1]`; lower skill
//! means larger detours, more jitter, faster tremor, more idle pauses (τ
//! stalls) and longer phases. Labels are `round(1 + 4s + ε)` per category.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{
    write_clip, write_manifest, ClipEntry, ClipRecord, DatasetManifest, InstrumentTrack, Mode,
    OrdinalScale, PhaseAnnotation, Sample, SkillClass, Split,
};
use crate::eval::spearman;
use crate::{seeded_rng, Error, Result};

pub const DEFAULT_CATEGORIES: [&str; 3] = ["Overall", "Economy of movements", "Time and Motion"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_clips: usize,
    /// Novice, intermediate, expert.
    pub class_proportions: [f64; 3],
    pub instruments: Vec<String>,
    pub phases: Vec<String>,
    /// Nominal frames per phase; actual lengths vary with skill.
    pub frames_per_phase: usize,
    pub sample_rate_hz: f64,
    /// Standard deviation of additive position noise (normalized image
    /// units).
    pub noise: f64,
    /// Standard deviation of the label noise `ε`.
    pub label_noise: f64,
    /// Probability per frame that a short visibility dropout starts.
    pub dropout_rate: f64,
    pub seed: u64,
    pub mode: Mode,
    pub categories: Vec<String>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_clips: 300,
            class_proportions: [1.0 / 3.0; 3],
            instruments: vec!["grasper".into(), "hook".into()],
            phases: vec!["calot".into(), "dissection".into()],
            frames_per_phase: 250,
            sample_rate_hz: 25.0,
            noise: 5e-5,
            label_noise: 0.08,
            dropout_rate: 0.004,
            seed: 0,
            mode: Mode::TwoD,
            categories: DEFAULT_CATEGORIES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.n_clips < 3 {
            return bad(format!("n_clips must be >= 3, got {}", self.n_clips));
        }
        let total: f64 = self.class_proportions.iter().sum();
        if self
            .class_proportions
            .iter()
            .any(|p| !(p.is_finite() && *p >= 0.0))
            || (total - 1.0).abs() > 1e-9
        {
            return bad(format!(
                "class proportions {:?} must be >= 0 and sum to 1",
                self.class_proportions
            ));
        }
        if self.instruments.is_empty() || self.phases.is_empty() || self.categories.is_empty() {
            return bad("instruments, phases and categories must be non-empty".into());
        }
        if self.frames_per_phase < 20 {
            return bad("frames_per_phase must be >= 20".into());
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return bad("sample_rate_hz must be positive".into());
        }
        if !(self.noise >= 0.0
            && self.label_noise >= 0.0
            && (0.0..0.1).contains(&self.dropout_rate))
        {
            return bad("noise and label_noise must be >= 0, dropout_rate in [0, 0.1)".into());
        }
        Ok(())
    }
}

/// Per-class clip counts: floors of `n · p`, with the remainder going to the
/// largest fractional parts (ties to the lower class).
pub fn class_counts(n: usize, proportions: &[f64; 3]) -> [usize; 3] {
    let exact = proportions.map(|p| p * n as f64);
    let mut counts = exact.map(|x| x.floor() as usize);
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .total_cmp(&(exact[a] - exact[a].floor()))
            .then(a.cmp(&b))
    });
    let mut left = n - counts.iter().sum::<usize>();
    for &c in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[c] += 1;
        left -= 1;
    }
    counts
}

fn class_center(skill: SkillClass) -> f64 {
    match skill {
        SkillClass::Novice => 0.0,
        SkillClass::Intermediate => 0.5,
        SkillClass::Expert => 1.0,
    }
}

/// Generating parameters for one skill level `s`.
struct Style {
    /// Peak sideways detour as a fraction of the straight-line distance.
    detour: f64,
    jitter: f64,
    tremor_amp: f64,
    /// Tremor cycles per unit progress.
    tremor_cycles: f64,
    idle_fraction: f64,
    pauses: usize,
    duration_scale: f64,
}

impl Style {
    fn new(s: f64) -> Self {
        let u = 1.0 - s;
        Self {
            detour: 0.15 * (1.0 + u),
            jitter: 0.004 * (1.0 + 2.0 * u),
            tremor_amp: 0.0006 * (1.0 + 2.0 * u),
            tremor_cycles: 20.0 + 40.0 * u,
            idle_fraction: 0.05 + 0.2 * u,
            pauses: 1 + (3.0 * u).round() as usize,
            duration_scale: 0.85 + 0.3 * u,
        }
    }
}

/// Progress per frame: linear while moving, flat during pauses.
fn progress(frames: usize, style: &Style, rng: &mut impl Rng) -> Vec<f64> {
    let idle_total = ((frames as f64) * style.idle_fraction).round() as usize;
    let mut pause_len = vec![idle_total / style.pauses; style.pauses];
    for p in pause_len.iter_mut().take(idle_total % style.pauses) {
        *p += 1;
    }
    let moving = frames - idle_total;
    // Pause start points in moving-frame units, kept off the very ends.
    let mut starts: Vec<usize> = (0..style.pauses)
        .map(|_| rng.random_range(moving / 10..=moving * 9 / 10))
        .collect();
    starts.sort_unstable();

    let mut tau = Vec::with_capacity(frames);
    let mut moved = 0usize;
    let mut next = 0;
    while tau.len() < frames {
        if next < starts.len() && moved >= starts[next] {
            for _ in 0..pause_len[next] {
                tau.push(moved as f64 / (moving - 1).max(1) as f64);
            }
            next += 1;
            continue;
        }
        tau.push(moved as f64 / (moving - 1).max(1) as f64);
        moved += 1;
    }
    tau.truncate(frames);
    tau.iter_mut().for_each(|t| *t = t.min(1.0));
    tau
}

struct Harmonic {
    cycles: f64,
    phase: f64,
    amp: [f64; 3],
}

/// One instrument's positions over one phase.
fn phase_path(
    start: [f64; 3],
    end: [f64; 3],
    tau: &[f64],
    style: &Style,
    dim: usize,
    rng: &mut impl Rng,
) -> Vec<[f64; 3]> {
    let delta = [end[0] - start[0], end[1] - start[1], end[2] - start[2]];
    let dist = (delta[0].powi(2) + delta[1].powi(2) + delta[2].powi(2))
        .sqrt()
        .max(1e-9);
    // In-plane perpendicular for the detour bump.
    let perp = [-delta[1] / dist, delta[0] / dist, 0.0];
    let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let harmonics: Vec<Harmonic> = [2.0, 3.0, 5.0]
        .iter()
        .map(|&cycles| Harmonic {
            cycles,
            phase: rng.random_range(0.0..2.0 * PI),
            amp: [
                rng.random_range(0.5..1.0),
                rng.random_range(0.5..1.0),
                if dim == 3 {
                    rng.random_range(0.5..1.0)
                } else {
                    0.0
                },
            ],
        })
        .collect();
    let tremor_phase = rng.random_range(0.0..2.0 * PI);
    tau.iter()
        .map(|&t| {
            // Jitter and tremor vanish at both ends so phases join smoothly.
            let envelope = (PI * t).sin();
            let bump = side * style.detour * dist * envelope;
            let tremor =
                style.tremor_amp * (2.0 * PI * style.tremor_cycles * t + tremor_phase).sin();
            let mut p = [0.0; 3];
            for k in 0..dim {
                let jitter: f64 = harmonics
                    .iter()
                    .map(|h| h.amp[k] * (2.0 * PI * h.cycles * t + h.phase).sin())
                    .sum::<f64>()
                    * style.jitter
                    / 3.0;
                p[k] = start[k] + t * delta[k] + bump * perp[k] + envelope * (jitter + tremor);
            }
            p
        })
        .collect()
}

fn waypoint(dim: usize, rng: &mut impl Rng) -> [f64; 3] {
    let mut p = [0.0; 3];
    for v in p.iter_mut().take(dim) {
        *v = rng.random_range(0.15..0.85);
    }
    p
}

/// A generated clip together with its latent skill.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthClip {
    pub record: ClipRecord,
    pub latent: f64,
}

/// Generates one clip of the given skill class. The latent skill is the
/// class center plus a small uniform jitter.
pub fn generate_clip(
    clip_id: &str,
    skill: SkillClass,
    spec: &SynthSpec,
    rng: &mut impl Rng,
) -> Result<SynthClip> {
    spec.validate()?;
    let latent = (class_center(skill) + rng.random_range(-0.04..0.04)).clamp(0.0, 1.0);
    let style = Style::new(latent);
    let dim = spec.mode.dim();

    let mut phases = Vec::with_capacity(spec.phases.len());
    let mut start = 0i64;
    for name in &spec.phases {
        let scale = style.duration_scale * rng.random_range(0.95..1.05);
        let len = ((spec.frames_per_phase as f64) * scale).round().max(20.0) as i64;
        phases.push(PhaseAnnotation {
            phase_name: name.clone(),
            start_frame: start,
            end_frame: start + len,
        });
        start += len;
    }
    let n_frames = start;
    let noise = Normal::new(0.0, spec.noise.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidInput(e.to_string()))?;

    let mut tracks = Vec::with_capacity(spec.instruments.len());
    for instrument in &spec.instruments {
        let mut positions = Vec::with_capacity(n_frames as usize);
        let mut from = waypoint(dim, rng);
        for phase in &phases {
            let frames = (phase.end_frame - phase.start_frame) as usize;
            let to = waypoint(dim, rng);
            let tau = progress(frames, &style, rng);
            positions.extend(phase_path(from, to, &tau, &style, dim, rng));
            from = to;
        }
        let mut samples = Vec::with_capacity(positions.len());
        let mut hidden_left = 0;
        for (f, mut p) in positions.into_iter().enumerate() {
            for v in p.iter_mut().take(dim) {
                if spec.noise > 0.0 {
                    *v += noise.sample(rng);
                }
            }
            if hidden_left == 0 && f > 0 && rng.random::<f64>() < spec.dropout_rate {
                hidden_left = rng.random_range(1..=3);
            }
            let visible = hidden_left == 0;
            if !visible {
                hidden_left -= 1;
                p = [f64::NAN, f64::NAN, if dim == 3 { f64::NAN } else { 0.0 }];
            }
            samples.push(Sample {
                frame: f as i64,
                t: f as f64 / spec.sample_rate_hz,
                position: p,
                visible,
            });
        }
        tracks.push(InstrumentTrack {
            clip_id: clip_id.to_string(),
            instrument_id: instrument.clone(),
            dim,
            samples,
        });
    }
    tracks.sort_by(|a, b| a.instrument_id.cmp(&b.instrument_id));

    let label_noise = Normal::new(0.0, spec.label_noise.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let scale = OrdinalScale::default();
    let labels: BTreeMap<String, i64> = spec
        .categories
        .iter()
        .map(|c| {
            let eps = if spec.label_noise > 0.0 {
                label_noise.sample(rng)
            } else {
                0.0
            };
            let score = (1.0 + 4.0 * latent + eps).round() as i64;
            (c.clone(), score.clamp(scale.min, scale.max))
        })
        .collect();

    Ok(SynthClip {
        record: ClipRecord {
            clip_id: clip_id.to_string(),
            mode: spec.mode,
            n_frames,
            tracks,
            phases,
            labels,
            skill_class: Some(skill),
        },
        latent,
    })
}

/// Generates the full dataset in memory: clips `clip_0000…` with shuffled
/// class assignment, a 70/15/15 split by seeded shuffle, and per-clip
/// subseeds. Fails if any category's labels correlate with the latent skill
/// below 0.8 (Spearman).
pub fn generate_clips(spec: &SynthSpec) -> Result<(Vec<SynthClip>, BTreeMap<String, Split>)> {
    spec.validate()?;
    let mut rng = seeded_rng(spec.seed);
    let counts = class_counts(spec.n_clips, &spec.class_proportions);
    let mut classes: Vec<SkillClass> = SkillClass::ALL
        .iter()
        .zip(counts)
        .flat_map(|(&c, k)| std::iter::repeat_n(c, k))
        .collect();
    classes.shuffle(&mut rng);
    let seeds: Vec<u64> = (0..spec.n_clips).map(|_| rng.random()).collect();
    let ids: Vec<String> = (0..spec.n_clips).map(|i| format!("clip_{i:04}")).collect();

    let clips = ids
        .par_iter()
        .zip(classes.par_iter())
        .zip(seeds.par_iter())
        .map(|((id, &skill), &seed)| generate_clip(id, skill, spec, &mut seeded_rng(seed)))
        .collect::<Result<Vec<_>>>()?;

    let mut order: Vec<usize> = (0..spec.n_clips).collect();
    order.shuffle(&mut rng);
    let n_train = (0.7 * spec.n_clips as f64).round() as usize;
    let n_val = (0.15 * spec.n_clips as f64).round() as usize;
    let split = order
        .iter()
        .enumerate()
        .map(|(rank, &i)| {
            let s = if rank < n_train {
                Split::Train
            } else if rank < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
            (ids[i].clone(), s)
        })
        .collect();

    let latent: Vec<f64> = clips.iter().map(|c| c.latent).collect();
    for category in &spec.categories {
        let labels: Vec<f64> = clips
            .iter()
            .map(|c| c.record.labels[category] as f64)
            .collect();
        match spearman(&latent, &labels) {
            Ok(rho) if rho < 0.8 => {
                return Err(Error::Validation(format!(
                    "generated labels for {category} correlate with latent skill at {rho:.3} < 0.8"
                )))
            }
            // Single-class datasets have constant labels; nothing to check.
            Ok(_) | Err(Error::ZeroVariance) => {}
            Err(e) => return Err(e),
        }
    }
    Ok((clips, split))
}

/// Writes `out/manifest.json` and `out/clips/<id>.{json,csv}`.
pub fn generate_dataset(spec: &SynthSpec, out: &Path) -> Result<DatasetManifest> {
    let (clips, split) = generate_clips(spec)?;
    let clip_dir = out.join("clips");
    let entries = clips
        .par_iter()
        .map(|c| {
            write_clip(&clip_dir, &c.record)?;
            Ok(ClipEntry {
                path: format!("clips/{}.json", c.record.clip_id),
                trajectories: format!("{}.csv", c.record.clip_id),
                record: c.record.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest {
        path: out.join("manifest.json"),
        ordinal_scale: OrdinalScale::default(),
        categories: spec.categories.clone(),
        clips: entries,
        split,
    };
    write_manifest(&manifest, &manifest.path)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_use_largest_remainder() {
        assert_eq!(class_counts(300, &[1.0 / 3.0; 3]), [100, 100, 100]);
        assert_eq!(class_counts(10, &[0.6, 0.3, 0.1]), [6, 3, 1]);
        assert_eq!(class_counts(4, &[1.0 / 3.0; 3]).iter().sum::<usize>(), 4);
        assert_eq!(class_counts(4, &[1.0 / 3.0; 3]), [2, 1, 1]);
    }

    #[test]
    fn progress_stalls_for_idle_frames() {
        let style = Style::new(0.0);
        let tau = progress(200, &style, &mut seeded_rng(1));
        assert_eq!(tau.len(), 200);
        assert_eq!(tau[0], 0.0);
        assert_eq!(*tau.last().unwrap(), 1.0);
        let flat = tau.windows(2).filter(|w| w[0] == w[1]).count();
        assert_eq!(flat, (200.0 * style.idle_fraction).round() as usize);
    }
}
