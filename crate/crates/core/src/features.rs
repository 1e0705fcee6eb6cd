//! Segmentation into 0.8 s windows and the 55-value feature vector per
//! segment: four statistics over each of the ten interpolated coefficient
//! series, then three statistics of the approximation/detail
//! cross-correlation at each level.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dwt::{self, InterpolatedDecomposition, LEVELS};
use crate::error::{Error, Result};
use crate::table;
use crate::trace_io::{EventLabel, Trace, CANONICAL_FS};

/// Samples per segment (0.8 s at 10 Hz).
pub const SEGMENT_LEN: usize = 8;
pub const WAVELET_FEATURES: usize = 2 * LEVELS * 4;
pub const XCORR_FEATURES: usize = LEVELS * 3;
pub const N_FEATURES: usize = WAVELET_FEATURES + XCORR_FEATURES;

const STATS: [&str; 4] = ["max", "mav", "med", "ent"];
const XCORR_STATS: [&str; 3] = ["max", "mean", "med"];

/// Canonical feature names, e.g. `cA5max`, `cD1ent`, `xCorr3med`.
pub fn feature_names() -> Vec<String> {
    let mut names = Vec::with_capacity(N_FEATURES);
    for kind in ["cA", "cD"] {
        for level in 1..=LEVELS {
            for stat in STATS {
                names.push(format!("{kind}{level}{stat}"));
            }
        }
    }
    for level in 1..=LEVELS {
        for stat in XCORR_STATS {
            names.push(format!("xCorr{level}{stat}"));
        }
    }
    names
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentBounds {
    pub index: usize,
    /// First sample of the segment.
    pub start: usize,
    pub label: EventLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFeatures {
    pub trace_id: String,
    pub segment_index: usize,
    pub start_s: f64,
    pub label: EventLabel,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureMatrix {
    pub rows: Vec<SegmentFeatures>,
}

impl FeatureMatrix {
    pub fn feature_names(&self) -> Vec<String> {
        feature_names()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn count(&self, label: EventLabel) -> usize {
        self.rows.iter().filter(|r| r.label == label).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("trace_id,segment_index,start_s,label,");
        out.push_str(&feature_names().join(","));
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{},{},{},{}", r.trace_id, r.segment_index, r.start_s, r.label);
            for v in &r.features {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        table::write_file(path, &self.to_csv())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let t = table::read_table(path)?;
        let mut header: Vec<String> = ["trace_id", "segment_index", "start_s", "label"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(feature_names());
        table::expect_header(path, &t, &header)?;
        let mut rows = Vec::with_capacity(t.rows.len());
        for (line, f) in &t.rows {
            if f.len() != header.len() {
                return Err(table::parse_error(path, *line, "wrong column count"));
            }
            let features = f[4..]
                .iter()
                .map(|v| table::field::<f64>(path, *line, v))
                .collect::<Result<Vec<_>>>()?;
            rows.push(SegmentFeatures {
                trace_id: f[0].clone(),
                segment_index: table::field(path, *line, &f[1])?,
                start_s: table::field(path, *line, &f[2])?,
                label: f[3]
                    .parse()
                    .map_err(|m: String| table::parse_error(path, *line, m))?,
                features,
            });
        }
        Ok(Self { rows })
    }
}

/// Splits a 10 Hz trace into consecutive 8-sample windows (a trailing
/// remainder is dropped) and labels each: any overlap with an annotation
/// assigns its label, with VOID > DO > ABD when several overlap.
pub fn segment(trace: &Trace, interp: &InterpolatedDecomposition) -> Result<Vec<SegmentBounds>> {
    if trace.fs() != CANONICAL_FS {
        return Err(Error::RateMismatch {
            expected: CANONICAL_FS,
            actual: trace.fs(),
        });
    }
    if interp.source_len != trace.len() {
        return Err(Error::ShapeMismatch(format!(
            "decomposition covers {} samples, trace has {}",
            interp.source_len,
            trace.len()
        )));
    }
    Ok(segment_labels(trace))
}

pub(crate) fn segment_labels(trace: &Trace) -> Vec<SegmentBounds> {
    (0..trace.len() / SEGMENT_LEN)
        .map(|index| {
            let start = index * SEGMENT_LEN;
            let label = trace
                .annotations()
                .iter()
                .filter(|a| (start..start + SEGMENT_LEN).any(|j| a.covers(trace.time_of(j))))
                .map(|a| a.label)
                .max_by_key(|l| l.priority())
                .unwrap_or(EventLabel::None);
            SegmentBounds {
                index,
                start,
                label,
            }
        })
        .collect()
}

pub fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn mean_abs(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64
}

/// Median; even-length input averages the two middle order statistics.
pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

/// Shannon entropy (natural log) of the normalized energy distribution
/// `p_i = v_i² / Σ v_j²`. Zero for an all-zero window.
pub fn energy_entropy(v: &[f64]) -> f64 {
    let total: f64 = v.iter().map(|x| x * x).sum();
    if total == 0.0 {
        return 0.0;
    }
    let h: f64 = v
        .iter()
        .map(|x| x * x / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    h.max(0.0)
}

/// Full normalized cross-correlation over lags `−(n−1)..=(n−1)`:
/// `r(l) = Σ_n a[n]·d[n+l] / (‖a‖·‖d‖)`, all zeros if either norm is zero.
pub fn normalized_xcorr(a: &[f64], d: &[f64]) -> Vec<f64> {
    let n = a.len();
    assert_eq!(n, d.len());
    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt() * d.iter().map(|x| x * x).sum::<f64>().sqrt();
    let lags = -(n as isize - 1)..=(n as isize - 1);
    if norm == 0.0 {
        return lags.map(|_| 0.0).collect();
    }
    lags.map(|lag| {
        let s: f64 = (0..n as isize)
            .filter(|&i| (0..n as isize).contains(&(i + lag)))
            .map(|i| a[i as usize] * d[(i + lag) as usize])
            .sum();
        (s / norm).clamp(-1.0, 1.0)
    })
    .collect()
}

/// Computes the 55 features of one segment.
pub fn segment_features(
    trace_id: &str,
    bounds: SegmentBounds,
    interp: &InterpolatedDecomposition,
    fs: f64,
) -> SegmentFeatures {
    let window = bounds.start..bounds.start + SEGMENT_LEN;
    let mut features = Vec::with_capacity(N_FEATURES);
    for series in &interp.series {
        let w = &series[window.clone()];
        features.extend([max(w), mean_abs(w), median(w), energy_entropy(w)]);
    }
    for level in 1..=LEVELS {
        let r = normalized_xcorr(&interp.approx(level)[window.clone()], &interp.detail(level)[window.clone()]);
        features.extend([max(&r), r.iter().sum::<f64>() / r.len() as f64, median(&r)]);
    }
    SegmentFeatures {
        trace_id: trace_id.to_string(),
        segment_index: bounds.index,
        start_s: bounds.start as f64 / fs,
        label: bounds.label,
        features,
    }
}

/// Decomposition of a whole trace, ready for segmentation.
pub fn decompose(trace: &Trace) -> Result<InterpolatedDecomposition> {
    let d = dwt::dwt5_db2(trace.samples())?;
    Ok(dwt::interpolate_full_length(&d))
}

pub fn featurize_trace(trace: &Trace) -> Result<Vec<SegmentFeatures>> {
    let run = || -> Result<Vec<SegmentFeatures>> {
        let interp = decompose(trace)?;
        Ok(segment(trace, &interp)?
            .into_iter()
            .map(|b| segment_features(trace.trace_id(), b, &interp, trace.fs()))
            .collect())
    };
    run().map_err(|e| e.in_trace(trace.trace_id()))
}

/// Featurizes every trace (in parallel) and concatenates in input order.
pub fn extract_all(traces: &[Trace]) -> Result<FeatureMatrix> {
    let per_trace: Vec<Vec<SegmentFeatures>> = traces
        .par_iter()
        .map(featurize_trace)
        .collect::<Result<_>>()?;
    Ok(FeatureMatrix {
        rows: per_trace.into_iter().flatten().collect(),
    })
}

/// Randomly keeps as many NONE rows as there are ABD+DO+VOID rows. Other
/// rows and the relative order of all kept rows are unchanged.
pub fn balance_none(matrix: &FeatureMatrix, seed: u64) -> FeatureMatrix {
    let none_idx: Vec<usize> = matrix
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.label == EventLabel::None)
        .map(|(i, _)| i)
        .collect();
    let target = matrix.len() - none_idx.len();
    if none_idx.len() <= target {
        return matrix.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![true; matrix.len()];
    for &i in &none_idx {
        keep[i] = false;
    }
    for pick in rand::seq::index::sample(&mut rng, none_idx.len(), target) {
        keep[none_idx[pick]] = true;
    }
    FeatureMatrix {
        rows: matrix
            .rows
            .iter()
            .zip(keep)
            .filter(|(_, k)| *k)
            .map(|(r, _)| r.clone())
            .collect(),
    }
}
