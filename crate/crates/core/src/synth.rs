//! Seeded synthetic Pves traces with exact ground-truth annotations.
//!
//! ABD events are short sin⁴ spikes, DO events smooth sin² bumps and VOID
//! events plateaus with raised-cosine edges, added on top of a drifting
//! baseline with Gaussian noise. Every annotation covers exactly the
//! samples where its morphology is non-zero.

use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::DatasetManifest;
use crate::trace_io::{save_trace, Annotation, EventLabel, Trace, CANONICAL_FS};

/// Fraction of a VOID's length taken by each raised-cosine edge.
const VOID_EDGE_FRACTION: f64 = 0.15;

/// Closed ranges from which per-event amplitude (cmH2O) and duration (s)
/// are drawn uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Morphology {
    pub amplitude: (f64, f64),
    pub duration_s: (f64, f64),
}

/// Number of events of each class in one trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventMix {
    pub abd: usize,
    #[serde(rename = "do")]
    pub do_: usize,
    pub void: usize,
}

impl EventMix {
    pub fn total(&self) -> usize {
        self.abd + self.do_ + self.void
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_traces: usize,
    pub duration_s: f64,
    /// Trace `i` uses mix `i % mixes.len()` and is tagged with dataset
    /// letter `A`, `B`, ... by the same index.
    pub mixes: Vec<EventMix>,
    pub abd: Morphology,
    #[serde(rename = "do")]
    pub do_: Morphology,
    pub void: Morphology,
    pub baseline_level: (f64, f64),
    /// Linear drift over the whole trace, cmH2O per minute.
    pub drift_per_min: (f64, f64),
    pub noise_sigma: f64,
    /// Quiet time enforced between consecutive events and at both ends.
    pub min_gap_s: f64,
    /// Adds one annotated ABD spike inside every VOID.
    pub abd_in_void: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_traces: 60,
            duration_s: 600.0,
            mixes: vec![
                EventMix { abd: 4, do_: 2, void: 1 },
                EventMix { abd: 2, do_: 3, void: 1 },
                EventMix { abd: 2, do_: 1, void: 2 },
            ],
            abd: Morphology {
                amplitude: (20.0, 60.0),
                duration_s: (2.0, 8.0),
            },
            do_: Morphology {
                amplitude: (10.0, 40.0),
                duration_s: (15.0, 60.0),
            },
            void: Morphology {
                amplitude: (30.0, 80.0),
                duration_s: (30.0, 120.0),
            },
            baseline_level: (10.0, 30.0),
            drift_per_min: (-0.5, 0.5),
            noise_sigma: 2.0,
            min_gap_s: 10.0,
            abd_in_void: false,
        }
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64), positive: bool) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) || (positive && lo <= 0.0) {
        return Err(Error::Config(format!("{name} range [{lo}, {hi}] is invalid")));
    }
    Ok(())
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_traces == 0 || self.mixes.is_empty() {
            return Err(Error::Config("need at least one trace and one event mix".into()));
        }
        if self.mixes.len() > 26 {
            return Err(Error::Config("at most 26 event mixes are supported".into()));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::Config(format!("duration {} must be positive", self.duration_s)));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Config(format!("noise sigma {} must be ≥ 0", self.noise_sigma)));
        }
        if !(self.min_gap_s.is_finite() && self.min_gap_s >= 0.0) {
            return Err(Error::Config(format!("min gap {} must be ≥ 0", self.min_gap_s)));
        }
        for (name, m) in [("ABD", &self.abd), ("DO", &self.do_), ("VOID", &self.void)] {
            check_range(&format!("{name} amplitude"), m.amplitude, true)?;
            check_range(&format!("{name} duration"), m.duration_s, true)?;
        }
        check_range("baseline level", self.baseline_level, false)?;
        check_range("drift", self.drift_per_min, false)?;
        for (i, mix) in self.mixes.iter().enumerate() {
            let worst = mix.abd as f64 * self.abd.duration_s.1
                + mix.do_ as f64 * self.do_.duration_s.1
                + mix.void as f64 * self.void.duration_s.1
                + (mix.total() + 1) as f64 * self.min_gap_s;
            if worst > self.duration_s {
                return Err(Error::Config(format!(
                    "event mix {i} needs up to {worst} s but traces last {} s",
                    self.duration_s
                )));
            }
        }
        Ok(())
    }

    pub fn trace_id(i: usize) -> String {
        format!("syn{i:03}")
    }

    pub fn dataset_tag(&self, i: usize) -> String {
        char::from(b'A' + (i % self.mixes.len()) as u8).to_string()
    }

    pub fn dataset_manifest(&self) -> DatasetManifest {
        DatasetManifest {
            tags: (0..self.n_traces)
                .map(|i| (Self::trace_id(i), self.dataset_tag(i)))
                .collect(),
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Unit-peak shape value at sample `k` of an event `len` samples long.
pub fn shape(label: EventLabel, k: usize, len: usize) -> f64 {
    let u = (k as f64 + 0.5) / len as f64;
    match label {
        EventLabel::Abd => (PI * u).sin().powi(4),
        EventLabel::Do => (PI * u).sin().powi(2),
        EventLabel::Void => {
            let edge = VOID_EDGE_FRACTION;
            let v = u.min(1.0 - u);
            if v >= edge {
                1.0
            } else {
                0.5 * (1.0 - (PI * v / edge).cos())
            }
        }
        EventLabel::None => 0.0,
    }
}

fn samples_for(seconds: f64, fs: f64) -> usize {
    ((seconds * fs).round() as usize).max(1)
}

/// Spike lengths are odd so that the centre sample hits the full amplitude.
fn odd(n: usize) -> usize {
    if n.is_multiple_of(2) {
        n + 1
    } else {
        n
    }
}

struct Placed {
    label: EventLabel,
    start: usize,
    len: usize,
    amplitude: f64,
}

fn generate_one(config: &SynthConfig, index: usize) -> Result<Trace> {
    let fs = CANONICAL_FS;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    let mix = config.mixes[index % config.mixes.len()];
    let n = samples_for(config.duration_s, fs);

    let mut pending: Vec<(EventLabel, usize, f64)> = Vec::with_capacity(mix.total());
    for (label, count, m) in [
        (EventLabel::Abd, mix.abd, &config.abd),
        (EventLabel::Do, mix.do_, &config.do_),
        (EventLabel::Void, mix.void, &config.void),
    ] {
        for _ in 0..count {
            let mut len = samples_for(uniform(&mut rng, m.duration_s), fs);
            if label == EventLabel::Abd {
                len = odd(len);
            }
            pending.push((label, len, uniform(&mut rng, m.amplitude)));
        }
    }
    pending.shuffle(&mut rng);

    let gap = samples_for(config.min_gap_s, fs).max(1);
    let occupied: usize = pending.iter().map(|p| p.1).sum::<usize>() + gap * (pending.len() + 1);
    let slack = n
        .checked_sub(occupied)
        .ok_or_else(|| Error::Config(format!("events need {occupied} samples but the trace has {n}")))?;
    let weights: Vec<f64> = (0..=pending.len()).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total_w: f64 = weights.iter().sum();
    let mut extra: Vec<usize> = weights.iter().map(|w| (slack as f64 * w / total_w).floor() as usize).collect();
    let used: usize = extra.iter().sum();
    if let Some(last) = extra.last_mut() {
        *last += slack - used;
    }

    let mut placed = Vec::with_capacity(pending.len() * 2);
    let mut cursor = 0;
    for (k, (label, len, amplitude)) in pending.into_iter().enumerate() {
        cursor += gap + extra[k];
        placed.push(Placed {
            label,
            start: cursor,
            len,
            amplitude,
        });
        cursor += len;
    }
    if config.abd_in_void {
        let voids: Vec<(usize, usize)> = placed
            .iter()
            .filter(|p| p.label == EventLabel::Void)
            .map(|p| (p.start, p.len))
            .collect();
        for (start, len) in voids {
            let third = (len / 3).max(1);
            let longest_odd = if third.is_multiple_of(2) { third - 1 } else { third };
            let spike = odd(samples_for(uniform(&mut rng, config.abd.duration_s), fs)).min(longest_odd);
            let offset = len / 3 + rng.random_range(0..=(len / 3).saturating_sub(spike));
            placed.push(Placed {
                label: EventLabel::Abd,
                start: start + offset,
                len: spike,
                amplitude: uniform(&mut rng, config.abd.amplitude),
            });
        }
    }

    let level = uniform(&mut rng, config.baseline_level);
    let drift = uniform(&mut rng, config.drift_per_min) / (60.0 * fs);
    let noise = Normal::new(0.0, config.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut samples: Vec<f64> = (0..n).map(|i| level + drift * i as f64).collect();
    if config.noise_sigma > 0.0 {
        for s in &mut samples {
            *s += noise.sample(&mut rng);
        }
    }
    let mut annotations = Vec::with_capacity(placed.len());
    for p in &placed {
        for k in 0..p.len {
            samples[p.start + k] += p.amplitude * shape(p.label, k, p.len);
        }
        annotations.push(Annotation {
            start_s: p.start as f64 / fs,
            end_s: (p.start + p.len) as f64 / fs,
            label: p.label,
        });
    }
    Trace::new(SynthConfig::trace_id(index), samples, fs, annotations)
}

/// Generates `config.n_traces` traces. Trace `i` draws from its own RNG
/// stream, so the output does not depend on thread scheduling.
pub fn generate(config: &SynthConfig) -> Result<Vec<Trace>> {
    config.validate()?;
    (0..config.n_traces)
        .into_par_iter()
        .map(|i| generate_one(config, i))
        .collect()
}

/// Writes the traces in the trace file format plus `datasets.csv`.
pub fn write_corpus(config: &SynthConfig, traces: &[Trace], dir: &Path) -> Result<()> {
    traces.par_iter().try_for_each(|t| save_trace(t, dir))?;
    let path = dir.join("datasets.csv");
    std::fs::write(&path, config.dataset_manifest().to_csv()).map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet() -> SynthConfig {
        SynthConfig {
            n_traces: 6,
            noise_sigma: 0.0,
            drift_per_min: (0.0, 0.0),
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = SynthConfig {
            n_traces: 4,
            seed: 11,
            ..SynthConfig::default()
        };
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = SynthConfig { seed: 12, ..cfg.clone() };
        assert_ne!(generate(&cfg).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn class_counts_match_mix() {
        for abd_in_void in [false, true] {
            let cfg = SynthConfig {
                n_traces: 9,
                abd_in_void,
                ..SynthConfig::default()
            };
            for (i, t) in generate(&cfg).unwrap().iter().enumerate() {
                let mix = cfg.mixes[i % 3];
                let count = |l| t.annotations().iter().filter(|a| a.label == l).count();
                let extra = if abd_in_void { mix.void } else { 0 };
                assert_eq!(count(EventLabel::Abd), mix.abd + extra);
                assert_eq!(count(EventLabel::Do), mix.do_);
                assert_eq!(count(EventLabel::Void), mix.void);
                assert_eq!(t.len(), 6000);
            }
        }
    }

    #[test]
    fn annotations_delimit_morphology_exactly() {
        let cfg = quiet();
        for t in generate(&cfg).unwrap() {
            let base = t.samples()[0];
            for (i, &v) in t.samples().iter().enumerate() {
                let inside = t.annotations().iter().any(|a| a.covers(t.time_of(i)));
                if inside {
                    assert!(v > base, "{} sample {i} inside an event is flat", t.trace_id());
                } else {
                    assert_eq!(v, base, "{} sample {i} outside events is disturbed", t.trace_id());
                }
            }
        }
    }

    #[test]
    fn abd_peak_within_amplitude_range() {
        let cfg = quiet();
        for t in generate(&cfg).unwrap() {
            let base = t.samples()[0];
            for a in t.annotations().iter().filter(|a| a.label == EventLabel::Abd) {
                let lo = (a.start_s * 10.0).round() as usize;
                let hi = (a.end_s * 10.0).round() as usize;
                let peak = t.samples()[lo..hi].iter().cloned().fold(f64::MIN, f64::max) - base;
                assert!((20.0 - 1e-9..=60.0 + 1e-9).contains(&peak), "peak {peak}");
            }
        }
    }

    #[test]
    fn void_returns_to_baseline() {
        let cfg = SynthConfig {
            n_traces: 5,
            duration_s: 120.0,
            mixes: vec![EventMix { abd: 0, do_: 0, void: 1 }],
            void: Morphology {
                amplitude: (30.0, 80.0),
                duration_s: (60.0, 60.0),
            },
            noise_sigma: 0.5,
            ..SynthConfig::default()
        };
        for t in generate(&cfg).unwrap() {
            assert_eq!(t.annotations().len(), 1);
            let a = t.annotations()[0];
            assert_eq!(a.label, EventLabel::Void);
            assert!((a.end_s - a.start_s - 60.0).abs() < 1e-9);
            let end = (a.end_s * 10.0).round() as usize;
            let after = &t.samples()[end..(end + 30).min(t.len())];
            let before = &t.samples()[..(a.start_s * 10.0).round() as usize];
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            assert!((mean(after) - mean(before)).abs() < 2.0);
        }
    }

    #[test]
    fn abd_in_void_sits_inside_void() {
        let cfg = SynthConfig {
            abd_in_void: true,
            mixes: vec![EventMix { abd: 0, do_: 0, void: 2 }],
            n_traces: 3,
            ..SynthConfig::default()
        };
        for t in generate(&cfg).unwrap() {
            let voids: Vec<_> = t.annotations().iter().filter(|a| a.label == EventLabel::Void).collect();
            for a in t.annotations().iter().filter(|a| a.label == EventLabel::Abd) {
                assert!(voids.iter().any(|v| v.start_s <= a.start_s && a.end_s <= v.end_s));
            }
        }
    }

    #[test]
    fn events_that_cannot_fit_are_rejected() {
        let cfg = SynthConfig {
            duration_s: 100.0,
            ..SynthConfig::default()
        };
        assert!(matches!(generate(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn manifest_tags_cycle() {
        let cfg = SynthConfig {
            n_traces: 4,
            ..SynthConfig::default()
        };
        let m = cfg.dataset_manifest();
        assert_eq!(m.tags["syn000"], "A");
        assert_eq!(m.tags["syn002"], "C");
        assert_eq!(m.tags["syn003"], "A");
    }
}
