//! Annotated Pves traces: in-memory representation, CSV file pair I/O, and
//! resampling to the canonical 10 Hz rate.
//!
//! A trace on disk is two files sharing an id:
//!
//! * `<id>.pves.csv` with header `time_s,pves_cmh2o`, one row per sample.
//! * `<id>.events.csv` with header `start_s,end_s,label`, label in `ABD|DO|VOID`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical sampling rate of the pipeline.
pub const CANONICAL_FS: f64 = 10.0;

const TIME_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventLabel {
    Abd,
    Do,
    Void,
    None,
}

impl EventLabel {
    /// The three annotated event classes, in class-index order.
    pub const EVENTS: [EventLabel; 3] = [EventLabel::Abd, EventLabel::Do, EventLabel::Void];

    pub fn as_str(self) -> &'static str {
        match self {
            EventLabel::Abd => "ABD",
            EventLabel::Do => "DO",
            EventLabel::Void => "VOID",
            EventLabel::None => "NONE",
        }
    }

    /// Index into [`EventLabel::EVENTS`]; `None` for NONE.
    pub fn class_index(self) -> Option<usize> {
        match self {
            EventLabel::Abd => Some(0),
            EventLabel::Do => Some(1),
            EventLabel::Void => Some(2),
            EventLabel::None => None,
        }
    }

    /// Segment-labeling priority when annotations overlap: VOID > DO > ABD.
    pub(crate) fn priority(self) -> u8 {
        match self {
            EventLabel::Void => 3,
            EventLabel::Do => 2,
            EventLabel::Abd => 1,
            EventLabel::None => 0,
        }
    }
}

impl fmt::Display for EventLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "ABD" => Ok(EventLabel::Abd),
            "DO" => Ok(EventLabel::Do),
            "VOID" => Ok(EventLabel::Void),
            "NONE" => Ok(EventLabel::None),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub start_s: f64,
    pub end_s: f64,
    pub label: EventLabel,
}

impl Annotation {
    /// Whether the sample at time `t` falls in `[start_s, end_s)`.
    pub fn covers(&self, t: f64) -> bool {
        t >= self.start_s - TIME_TOL && t < self.end_s - TIME_TOL
    }
}

/// A validated single-channel pressure trace. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    trace_id: String,
    samples: Vec<f64>,
    fs: f64,
    annotations: Vec<Annotation>,
}

impl Trace {
    /// Validates and normalizes: annotations are sorted by start time and
    /// overlapping annotations with the same label are merged.
    pub fn new(
        trace_id: impl Into<String>,
        samples: Vec<f64>,
        fs: f64,
        annotations: Vec<Annotation>,
    ) -> Result<Self> {
        let trace_id = trace_id.into();
        if trace_id.is_empty() || trace_id.contains([',', '\n', '/']) {
            return Err(Error::Validation(format!("invalid trace id {trace_id:?}")));
        }
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::Validation(format!("sampling rate must be positive, got {fs}")));
        }
        if samples.is_empty() {
            return Err(Error::Validation("trace has no samples".into()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite sample {} at index {i}",
                samples[i]
            )));
        }
        let duration = samples.len() as f64 / fs;
        for a in &annotations {
            if a.label == EventLabel::None {
                return Err(Error::Validation("NONE cannot be annotated".into()));
            }
            if !(a.start_s.is_finite() && a.end_s.is_finite()) || a.end_s <= a.start_s {
                return Err(Error::Validation(format!(
                    "annotation {} [{}, {}] must end after it starts",
                    a.label, a.start_s, a.end_s
                )));
            }
            if a.start_s < -TIME_TOL || a.end_s > duration + TIME_TOL {
                return Err(Error::Validation(format!(
                    "annotation {} [{}, {}] lies outside [0, {duration}]",
                    a.label, a.start_s, a.end_s
                )));
            }
        }
        Ok(Self {
            trace_id,
            samples,
            fs,
            annotations: merge_annotations(annotations),
        })
    }

    pub fn trace_id(&self) -> &str {
        &self.trace_id
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    pub fn time_of(&self, index: usize) -> f64 {
        index as f64 / self.fs
    }

    /// Same trace with annotations removed.
    pub fn without_annotations(&self) -> Trace {
        Trace {
            annotations: Vec::new(),
            ..self.clone()
        }
    }
}

fn merge_annotations(mut annotations: Vec<Annotation>) -> Vec<Annotation> {
    annotations.sort_by(|a, b| {
        a.start_s
            .total_cmp(&b.start_s)
            .then(a.end_s.total_cmp(&b.end_s))
            .then(a.label.cmp(&b.label))
    });
    let mut merged: Vec<Annotation> = Vec::with_capacity(annotations.len());
    for a in annotations {
        // only merge with the most recent annotation of the same label
        if let Some(prev) = merged.iter_mut().rev().find(|p| p.label == a.label) {
            if a.start_s <= prev.end_s {
                prev.end_s = prev.end_s.max(a.end_s);
                continue;
            }
        }
        merged.push(a);
    }
    merged
}

pub fn pves_path(dir: &Path, trace_id: &str) -> PathBuf {
    dir.join(format!("{trace_id}.pves.csv"))
}

pub fn events_path(dir: &Path, trace_id: &str) -> PathBuf {
    dir.join(format!("{trace_id}.events.csv"))
}

/// Loads a trace from its `.pves.csv` path (the `.events.csv` sibling is
/// optional; a missing events file means an unannotated trace).
pub fn load_trace(pves: &Path) -> Result<Trace> {
    let name = pves
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::Validation(format!("bad trace path {}", pves.display())))?;
    let trace_id = name
        .strip_suffix(".pves.csv")
        .ok_or_else(|| Error::Validation(format!("{} does not end in .pves.csv", pves.display())))?;
    let dir = pves.parent().unwrap_or(Path::new("."));

    let (times, samples) = read_pves(pves)?;
    let fs = infer_rate(&times).map_err(|e| e.in_trace(trace_id))?;
    let ev_path = events_path(dir, trace_id);
    let annotations = if ev_path.exists() {
        read_events(&ev_path)?
    } else {
        Vec::new()
    };
    Trace::new(trace_id, samples, fs, annotations).map_err(|e| e.in_trace(trace_id))
}

/// Loads every `*.pves.csv` in `dir`, sorted by trace id.
pub fn load_dir(dir: &Path) -> Result<Vec<Trace>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let p = entry.path();
        if p.file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.ends_with(".pves.csv"))
        {
            paths.push(p);
        }
    }
    paths.sort();
    use rayon::prelude::*;
    paths.par_iter().map(|p| load_trace(p)).collect()
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_f64(path: &Path, line: usize, field: &str) -> Result<f64> {
    // "NaN"/"inf" parse fine and are rejected later by validation
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| parse_err(path, line, format!("not a number: {field:?}")))
}

fn read_pves(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "time_s,pves_cmh2o" => {}
        _ => return Err(parse_err(path, 1, "expected header time_s,pves_cmh2o")),
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (Some(t), Some(v), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_err(path, i + 1, "expected 2 columns"));
        };
        times.push(parse_f64(path, i + 1, t)?);
        values.push(parse_f64(path, i + 1, v)?);
    }
    Ok((times, values))
}

fn read_events(path: &Path) -> Result<Vec<Annotation>> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "start_s,end_s,label" => {}
        _ => return Err(parse_err(path, 1, "expected header start_s,end_s,label")),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(parse_err(path, i + 1, "expected 3 columns"));
        }
        let label: EventLabel = fields[2].parse().map_err(|m: String| parse_err(path, i + 1, m))?;
        if label == EventLabel::None {
            return Err(parse_err(path, i + 1, "NONE is not an annotation label"));
        }
        out.push(Annotation {
            start_s: parse_f64(path, i + 1, fields[0])?,
            end_s: parse_f64(path, i + 1, fields[1])?,
            label,
        });
    }
    Ok(out)
}

/// Sampling rate from a fixed-step time column.
fn infer_rate(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::Validation("need at least 2 samples to infer the sampling rate".into()));
    }
    if let Some(i) = times.iter().position(|t| !t.is_finite()) {
        return Err(Error::Validation(format!("non-finite time at row {}", i + 1)));
    }
    let step = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if step <= 0.0 {
        return Err(Error::Validation("time column must increase".into()));
    }
    for (i, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - step).abs() > 1e-6 * step.max(1.0) {
            return Err(Error::Validation(format!(
                "irregular time step at row {}: {} vs {step}",
                i + 2,
                w[1] - w[0]
            )));
        }
    }
    let fs = 1.0 / step;
    let rounded = fs.round();
    Ok(if (fs - rounded).abs() < 1e-6 * rounded.max(1.0) { rounded } else { fs })
}

/// Serializes a trace to the two-file format. Values use the shortest
/// round-trip decimal representation, so a reload is exact.
pub fn save_trace(trace: &Trace, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut pves = String::with_capacity(trace.len() * 16 + 32);
    pves.push_str("time_s,pves_cmh2o\n");
    for (i, v) in trace.samples().iter().enumerate() {
        pves.push_str(&format!("{},{}\n", trace.time_of(i), v));
    }
    let p = pves_path(dir, trace.trace_id());
    fs::write(&p, pves).map_err(|e| Error::io(&p, e))?;

    let mut ev = String::from("start_s,end_s,label\n");
    for a in trace.annotations() {
        ev.push_str(&format!("{},{},{}\n", a.start_s, a.end_s, a.label));
    }
    let p = events_path(dir, trace.trace_id());
    fs::write(&p, ev).map_err(|e| Error::io(&p, e))?;
    Ok(())
}

/// Brings a trace to 10 Hz. 100 Hz input is decimated by block means of 10
/// samples (a trailing partial block is dropped); 10 Hz input is returned
/// unchanged. Annotation times are preserved.
pub fn resample_to_10hz(trace: &Trace) -> Result<Trace> {
    const FACTOR: usize = 10;
    if trace.fs() == CANONICAL_FS {
        return Ok(trace.clone());
    }
    if trace.fs() != CANONICAL_FS * FACTOR as f64 {
        return Err(Error::UnsupportedRate(trace.fs()));
    }
    let samples: Vec<f64> = trace
        .samples()
        .chunks_exact(FACTOR)
        .map(|block| {
            // shifted mean is exact on constant blocks
            let anchor = block[0];
            anchor + block.iter().map(|v| v - anchor).sum::<f64>() / FACTOR as f64
        })
        .collect();
    if samples.is_empty() {
        return Err(Error::Validation(format!(
            "trace {} is shorter than one 10 Hz sample",
            trace.trace_id()
        )));
    }
    let duration = samples.len() as f64 / CANONICAL_FS;
    // annotations past the truncated end are clipped to it
    let annotations = trace
        .annotations()
        .iter()
        .filter(|a| a.start_s < duration)
        .map(|a| Annotation {
            end_s: a.end_s.min(duration),
            ..*a
        })
        .collect();
    Trace::new(trace.trace_id(), samples, CANONICAL_FS, annotations)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    fn pves_body(n: usize, fs: f64, f: impl Fn(usize) -> f64) -> String {
        let mut s = String::from("time_s,pves_cmh2o\n");
        for i in 0..n {
            s.push_str(&format!("{},{}\n", i as f64 / fs, f(i)));
        }
        s
    }

    #[test]
    fn loads_well_formed_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "t1.pves.csv", &pves_body(100, 10.0, |i| i as f64 * 0.5));
        write(dir.path(), "t1.events.csv", "start_s,end_s,label\n1.0,2.5,DO\n");
        let t = load_trace(&p).unwrap();
        assert_eq!(t.trace_id(), "t1");
        assert_eq!(t.len(), 100);
        assert_eq!(t.fs(), 10.0);
        assert_eq!(t.annotations().len(), 1);
        assert_eq!(t.annotations()[0].label, EventLabel::Do);
    }

    #[test]
    fn rejects_nan_sample() {
        let dir = tempfile::tempdir().unwrap();
        let body = pves_body(20, 10.0, |i| if i == 7 { f64::NAN } else { 1.0 });
        let p = write(dir.path(), "t.pves.csv", &body);
        let err = load_trace(&p).unwrap_err();
        assert_eq!(err.kind(), "ValidationError");
    }

    #[test]
    fn rejects_reversed_annotation() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "t.pves.csv", &pves_body(100, 10.0, |_| 1.0));
        write(dir.path(), "t.events.csv", "start_s,end_s,label\n5.0,4.0,ABD\n");
        assert_eq!(load_trace(&p).unwrap_err().kind(), "ValidationError");
    }

    #[test]
    fn rejects_annotation_past_end() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "t.pves.csv", &pves_body(100, 10.0, |_| 1.0));
        write(dir.path(), "t.events.csv", "start_s,end_s,label\n5.0,10.5,ABD\n");
        assert_eq!(load_trace(&p).unwrap_err().kind(), "ValidationError");
    }

    #[test]
    fn malformed_row_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "t.pves.csv", "time_s,pves_cmh2o\n0,1\n0.1,abc\n");
        assert_eq!(load_trace(&p).unwrap_err().kind(), "ParseError");
        let p = write(dir.path(), "u.pves.csv", "time_s,pves_cmh2o\n0,1,2\n");
        assert_eq!(load_trace(&p).unwrap_err().kind(), "ParseError");
    }

    #[test]
    fn merges_overlapping_same_label() {
        let anns = vec![
            Annotation { start_s: 3.0, end_s: 5.0, label: EventLabel::Abd },
            Annotation { start_s: 1.0, end_s: 4.0, label: EventLabel::Abd },
            Annotation { start_s: 2.0, end_s: 3.0, label: EventLabel::Void },
        ];
        let t = Trace::new("x", vec![0.0; 100], 10.0, anns).unwrap();
        assert_eq!(
            t.annotations(),
            &[
                Annotation { start_s: 1.0, end_s: 5.0, label: EventLabel::Abd },
                Annotation { start_s: 2.0, end_s: 3.0, label: EventLabel::Void },
            ]
        );
    }

    #[test]
    fn resample_constant_is_exact() {
        let t = Trace::new("c", vec![7.0; 1000], 100.0, vec![]).unwrap();
        let r = resample_to_10hz(&t).unwrap();
        assert_eq!(r.fs(), 10.0);
        assert_eq!(r.len(), 100);
        assert!(r.samples().iter().all(|&v| v == 7.0));

        let t = Trace::new("c", vec![0.1; 1000], 100.0, vec![]).unwrap();
        assert!(resample_to_10hz(&t).unwrap().samples().iter().all(|&v| v == 0.1));
    }

    #[test]
    fn resample_block_means() {
        // 1..=10 repeated: each block mean is 55/10
        let samples: Vec<f64> = (0..200).map(|i| (i % 10 + 1) as f64).collect();
        let t = Trace::new("r", samples, 100.0, vec![]).unwrap();
        let r = resample_to_10hz(&t).unwrap();
        assert_eq!(r.len(), 20);
        for v in r.samples() {
            assert!((v - 5.5).abs() < 1e-12);
        }
    }

    #[test]
    fn resample_identity_and_unsupported() {
        let ann = vec![Annotation { start_s: 1.0, end_s: 2.0, label: EventLabel::Do }];
        let t = Trace::new("i", (0..50).map(f64::from).collect(), 10.0, ann).unwrap();
        assert_eq!(resample_to_10hz(&t).unwrap(), t);
        let t = Trace::new("u", vec![1.0; 50], 25.0, vec![]).unwrap();
        assert!(matches!(resample_to_10hz(&t), Err(Error::UnsupportedRate(_))));
    }

    #[test]
    fn resample_keeps_duration_within_one_period() {
        for n in [1000usize, 1005, 1019] {
            let t = Trace::new("d", vec![1.0; n], 100.0, vec![]).unwrap();
            let r = resample_to_10hz(&t).unwrap();
            assert!((t.duration_s() - r.duration_s()).abs() < 0.1 + 1e-12);
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let samples: Vec<f64> = (0..137).map(|i| (i as f64 * 0.37).sin() * 13.1 + 0.1).collect();
        let anns = vec![
            Annotation { start_s: 0.3, end_s: 2.1, label: EventLabel::Abd },
            Annotation { start_s: 4.0, end_s: 9.9, label: EventLabel::Void },
        ];
        let t = Trace::new("rt", samples, 10.0, anns).unwrap();
        save_trace(&t, dir.path()).unwrap();
        let u = load_trace(&pves_path(dir.path(), "rt")).unwrap();
        assert_eq!(u.annotations(), t.annotations());
        for (a, b) in t.samples().iter().zip(u.samples()) {
            assert!((a - b).abs() <= 1e-9);
        }
        save_trace(&u, dir.path()).unwrap();
        assert_eq!(load_trace(&pves_path(dir.path(), "rt")).unwrap(), u);
    }
}
