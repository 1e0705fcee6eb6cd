//! Event aggregation (maximal runs of equally labeled segments, summarized
//! by per-feature medians) and leakage-free trace-level train/test splits.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{self, FeatureMatrix, N_FEATURES};
use crate::table;
use crate::trace_io::EventLabel;

/// Anything with an event span and an aggregated feature vector.
pub trait EventLike {
    fn trace_id(&self) -> &str;
    fn first_segment(&self) -> usize;
    fn last_segment(&self) -> usize;
    fn features(&self) -> &[f64];
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub trace_id: String,
    pub label: EventLabel,
    pub first_segment: usize,
    pub last_segment: usize,
    pub features: Vec<f64>,
}

impl EventLike for Event {
    fn trace_id(&self) -> &str {
        &self.trace_id
    }
    fn first_segment(&self) -> usize {
        self.first_segment
    }
    fn last_segment(&self) -> usize {
        self.last_segment
    }
    fn features(&self) -> &[f64] {
        &self.features
    }
}

impl Event {
    pub fn n_segments(&self) -> usize {
        self.last_segment - self.first_segment + 1
    }
}

/// Column-wise median of a set of equal-length rows.
pub fn column_median(rows: &[&[f64]]) -> Vec<f64> {
    let width = rows.first().map_or(0, |r| r.len());
    let mut col = Vec::with_capacity(rows.len());
    (0..width)
        .map(|j| {
            col.clear();
            col.extend(rows.iter().map(|r| r[j]));
            features::median(&col)
        })
        .collect()
}

/// Groups maximal runs of consecutive segments that share a non-NONE label
/// within one trace. Rows must be ordered by (trace, segment index); a gap
/// in segment indices also ends a run.
pub fn build_events(matrix: &FeatureMatrix) -> Vec<Event> {
    let rows = &matrix.rows;
    let mut events = Vec::new();
    let mut i = 0;
    while i < rows.len() {
        let start = &rows[i];
        let mut j = i + 1;
        while j < rows.len()
            && rows[j].trace_id == start.trace_id
            && rows[j].label == start.label
            && rows[j].segment_index == rows[j - 1].segment_index + 1
        {
            j += 1;
        }
        if start.label != EventLabel::None {
            let run: Vec<&[f64]> = rows[i..j].iter().map(|r| r.features.as_slice()).collect();
            events.push(Event {
                trace_id: start.trace_id.clone(),
                label: start.label,
                first_segment: start.segment_index,
                last_segment: rows[j - 1].segment_index,
                features: column_median(&run),
            });
        }
        i = j;
    }
    events
}

fn events_header() -> Vec<String> {
    let mut h: Vec<String> = ["trace_id", "label", "first_segment", "last_segment"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(features::feature_names());
    h
}

pub fn events_to_csv(events: &[Event]) -> String {
    let mut out = events_header().join(",");
    out.push('\n');
    for e in events {
        let _ = write!(out, "{},{},{},{}", e.trace_id, e.label, e.first_segment, e.last_segment);
        for v in &e.features {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_events(events: &[Event], path: &Path) -> Result<()> {
    table::write_file(path, &events_to_csv(events))
}

pub fn read_events(path: &Path) -> Result<Vec<Event>> {
    let t = table::read_table(path)?;
    let header = events_header();
    table::expect_header(path, &t, &header)?;
    t.rows
        .iter()
        .map(|(line, f)| {
            if f.len() != 4 + N_FEATURES {
                return Err(table::parse_error(path, *line, "wrong column count"));
            }
            let label: EventLabel = f[1]
                .parse()
                .map_err(|m: String| table::parse_error(path, *line, m))?;
            if label == EventLabel::None {
                return Err(table::parse_error(path, *line, "events cannot be NONE"));
            }
            Ok(Event {
                trace_id: f[0].clone(),
                label,
                first_segment: table::field(path, *line, &f[2])?,
                last_segment: table::field(path, *line, &f[3])?,
                features: f[4..]
                    .iter()
                    .map(|v| table::field::<f64>(path, *line, v))
                    .collect::<Result<_>>()?,
            })
        })
        .collect()
}

/// How to partition traces into train and test.
#[derive(Debug, Clone, PartialEq)]
pub enum SplitSpec {
    /// Stratified random split with this train fraction.
    Fraction(f64),
    /// Dataset-tag split, e.g. `A+B -> C`.
    Named { train: Vec<String>, test: Vec<String> },
}

impl FromStr for SplitSpec {
    type Err = Error;

    /// Accepts `60%`, `60/40`, `0.6`, or `manifest:A+B->C`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("cannot parse split {s:?}"));
        if let Some(rest) = s.strip_prefix("manifest:") {
            let (train, test) = rest.split_once("->").ok_or_else(bad)?;
            let tags = |side: &str| -> Vec<String> {
                side.split('+')
                    .map(|t| t.trim().to_string())
                    .filter(|t| !t.is_empty())
                    .collect()
            };
            let (train, test) = (tags(train), tags(test));
            if train.is_empty() || test.is_empty() {
                return Err(bad());
            }
            return Ok(SplitSpec::Named { train, test });
        }
        let frac = if let Some(p) = s.strip_suffix('%') {
            p.trim().parse::<f64>().map_err(|_| bad())? / 100.0
        } else if let Some((a, b)) = s.split_once('/') {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            a / (a + b)
        } else {
            s.parse::<f64>().map_err(|_| bad())?
        };
        if !(frac > 0.0 && frac < 1.0) {
            return Err(Error::Config(format!("train fraction must be in (0, 1), got {frac}")));
        }
        Ok(SplitSpec::Fraction(frac))
    }
}

impl fmt::Display for SplitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitSpec::Fraction(x) => write!(f, "{}%", x * 100.0),
            SplitSpec::Named { train, test } => {
                write!(f, "manifest:{}->{}", train.join("+"), test.join("+"))
            }
        }
    }
}

/// Maps trace ids to dataset tags (`trace_id,dataset` CSV).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetManifest {
    pub tags: BTreeMap<String, String>,
}

impl DatasetManifest {
    pub fn read_csv(path: &Path) -> Result<Self> {
        let t = table::read_table(path)?;
        table::expect_header(path, &t, &["trace_id".to_string(), "dataset".to_string()])?;
        let mut tags = BTreeMap::new();
        for (line, f) in &t.rows {
            if f.len() != 2 {
                return Err(table::parse_error(path, *line, "expected 2 columns"));
            }
            tags.insert(f[0].clone(), f[1].clone());
        }
        Ok(Self { tags })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("trace_id,dataset\n");
        for (id, tag) in &self.tags {
            let _ = writeln!(out, "{id},{tag}");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub train_trace_ids: BTreeSet<String>,
    pub test_trace_ids: BTreeSet<String>,
    pub seed: u64,
}

impl SplitPlan {
    pub fn is_train(&self, trace_id: &str) -> bool {
        self.train_trace_ids.contains(trace_id)
    }

    pub fn is_test(&self, trace_id: &str) -> bool {
        self.test_trace_ids.contains(trace_id)
    }

    /// Events on the train side and on the test side, in input order.
    /// Events from traces outside the plan are dropped.
    pub fn partition<'a, E: EventLike>(&self, events: &'a [E]) -> (Vec<&'a E>, Vec<&'a E>) {
        let train = events.iter().filter(|e| self.is_train(e.trace_id())).collect();
        let test = events.iter().filter(|e| self.is_test(e.trace_id())).collect();
        (train, test)
    }

    pub fn to_csv(&self) -> String {
        let mut rows: Vec<(&String, &str)> = self
            .train_trace_ids
            .iter()
            .map(|id| (id, "train"))
            .chain(self.test_trace_ids.iter().map(|id| (id, "test")))
            .collect();
        rows.sort();
        let mut out = String::from("trace_id,role\n");
        for (id, role) in rows {
            let _ = writeln!(out, "{id},{role}");
        }
        out
    }

    pub fn read_csv(path: &Path, seed: u64) -> Result<Self> {
        let t = table::read_table(path)?;
        table::expect_header(path, &t, &["trace_id".to_string(), "role".to_string()])?;
        let mut plan = SplitPlan {
            train_trace_ids: BTreeSet::new(),
            test_trace_ids: BTreeSet::new(),
            seed,
        };
        for (line, f) in &t.rows {
            match f.get(1).map(String::as_str) {
                Some("train") => plan.train_trace_ids.insert(f[0].clone()),
                Some("test") => plan.test_trace_ids.insert(f[0].clone()),
                _ => return Err(table::parse_error(path, *line, "role must be train or test")),
            };
        }
        if !plan.train_trace_ids.is_disjoint(&plan.test_trace_ids) {
            return Err(Error::Validation("split has traces on both sides".into()));
        }
        Ok(plan)
    }
}

const SPLIT_ATTEMPTS: u64 = 64;

/// Trace-level split. Random splits are stratified by each trace's dominant
/// event class; the seed fully determines the plan. A split where some
/// event class is missing from one side is retried with derived RNG
/// streams and reported as [`Error::InfeasibleSplit`] if it never works.
pub fn split_by_trace(
    events: &[Event],
    spec: &SplitSpec,
    manifest: Option<&DatasetManifest>,
    seed: u64,
) -> Result<SplitPlan> {
    let mut per_trace: BTreeMap<&str, [usize; 3]> = BTreeMap::new();
    for e in events {
        let counts = per_trace.entry(e.trace_id.as_str()).or_default();
        if let Some(c) = e.label.class_index() {
            counts[c] += 1;
        }
    }
    let classes_present: BTreeSet<usize> = events.iter().filter_map(|e| e.label.class_index()).collect();
    let feasible = |plan: &SplitPlan| -> Option<String> {
        for side in [&plan.train_trace_ids, &plan.test_trace_ids] {
            let have: BTreeSet<usize> = side
                .iter()
                .flat_map(|id| {
                    let c = per_trace[id.as_str()];
                    (0..3).filter(move |&k| c[k] > 0)
                })
                .collect();
            if let Some(missing) = classes_present.difference(&have).next() {
                let which = if std::ptr::eq(side, &plan.train_trace_ids) { "train" } else { "test" };
                return Some(format!("no {} events on the {which} side", EventLabel::EVENTS[*missing]));
            }
        }
        None
    };

    match spec {
        SplitSpec::Named { train, test } => {
            let manifest = manifest
                .ok_or_else(|| Error::Config("named split needs a dataset manifest".into()))?;
            if let Some(t) = train.iter().find(|t| test.contains(t)) {
                return Err(Error::Config(format!("dataset {t} is on both sides of the split")));
            }
            let mut plan = SplitPlan {
                train_trace_ids: BTreeSet::new(),
                test_trace_ids: BTreeSet::new(),
                seed,
            };
            for id in per_trace.keys() {
                let tag = manifest
                    .tags
                    .get(*id)
                    .ok_or_else(|| Error::Config(format!("trace {id} has no dataset tag")))?;
                if train.contains(tag) {
                    plan.train_trace_ids.insert(id.to_string());
                } else if test.contains(tag) {
                    plan.test_trace_ids.insert(id.to_string());
                }
            }
            match feasible(&plan) {
                Some(why) => Err(Error::InfeasibleSplit(why)),
                None => Ok(plan),
            }
        }
        SplitSpec::Fraction(frac) => {
            let n = per_trace.len();
            if n < 2 {
                return Err(Error::InfeasibleSplit(format!("{n} trace(s) cannot be split")));
            }
            // strata keyed by dominant class (ties toward VOID, then DO)
            let mut strata: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
            for (id, c) in &per_trace {
                let dominant = (0..3).rev().max_by_key(|&k| c[k]).unwrap_or(0);
                strata.entry(dominant).or_default().push(id);
            }
            let n_train = ((frac * n as f64).round() as usize).clamp(1, n - 1);
            let quotas = apportion(&strata.values().map(Vec::len).collect::<Vec<_>>(), *frac, n_train);

            let mut last_reason = String::new();
            for attempt in 0..SPLIT_ATTEMPTS {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(attempt);
                let mut plan = SplitPlan {
                    train_trace_ids: BTreeSet::new(),
                    test_trace_ids: BTreeSet::new(),
                    seed,
                };
                for (ids, &quota) in strata.values().zip(&quotas) {
                    let mut ids = ids.clone();
                    ids.shuffle(&mut rng);
                    for (k, id) in ids.into_iter().enumerate() {
                        if k < quota {
                            plan.train_trace_ids.insert(id.to_string());
                        } else {
                            plan.test_trace_ids.insert(id.to_string());
                        }
                    }
                }
                match feasible(&plan) {
                    None => return Ok(plan),
                    Some(why) => last_reason = why,
                }
            }
            Err(Error::InfeasibleSplit(format!(
                "{last_reason} after {SPLIT_ATTEMPTS} attempts"
            )))
        }
    }
}

/// Largest-remainder apportionment of `total` train slots over strata.
fn apportion(sizes: &[usize], frac: f64, total: usize) -> Vec<usize> {
    let mut quotas: Vec<usize> = sizes.iter().map(|&s| (s as f64 * frac).floor() as usize).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = sizes[a] as f64 * frac - quotas[a] as f64;
        let rb = sizes[b] as f64 * frac - quotas[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut assigned: usize = quotas.iter().sum();
    let mut k = 0;
    while assigned < total && k < 4 * order.len().max(1) {
        let s = order[k % order.len()];
        if quotas[s] < sizes[s] {
            quotas[s] += 1;
            assigned += 1;
        }
        k += 1;
    }
    while assigned > total {
        if let Some(s) = (0..quotas.len()).rev().find(|&s| quotas[s] > 0) {
            quotas[s] -= 1;
            assigned -= 1;
        }
    }
    quotas
}
