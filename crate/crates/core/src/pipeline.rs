//! Classifier configurations built from the MLP: the two-stage model
//! (VOID vs non-VOID, then ABD vs DO), its cascaded three-class use, and a
//! single-stage three-class model. Also a threshold-based candidate
//! proposer for traces without annotations.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::eval::{evaluate, EvaluationReport};
use crate::events::{column_median, Event, EventLike, SplitPlan};
use crate::features::{self, N_FEATURES, SEGMENT_LEN};
use crate::nn::{argmax, relieff_rank, train, Matrix, MlpModel, StageTag, TrainConfig};
use crate::trace_io::{EventLabel, Trace, CANONICAL_FS};

pub const STAGE1_CLASSES: [&str; 2] = ["Non-VOID", "VOID"];
pub const STAGE2_CLASSES: [&str; 2] = ["ABD", "DO"];
pub const THREE_CLASSES: [&str; 3] = ["ABD", "DO", "VOID"];

/// Half-width of the rolling-median baseline used by [`propose_events`].
pub const BASELINE_HALF_WINDOW_S: f64 = 60.0;
/// Minimum excess over the baseline for a segment to count as active.
pub const ACTIVITY_THRESHOLD: f64 = 5.0;
pub const MIN_CANDIDATE_SEGMENTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Single,
    TwoStage,
    Cascaded,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" | "single-stage" => Ok(Mode::Single),
            "two-stage" => Ok(Mode::TwoStage),
            "cascaded" => Ok(Mode::Cascaded),
            other => Err(Error::Config(format!(
                "unknown mode {other:?} (expected single, two-stage or cascaded)"
            ))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Single => "single",
            Mode::TwoStage => "two-stage",
            Mode::Cascaded => "cascaded",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub train: TrainConfig,
    /// Keep only the top-ranked ReliefF features when set.
    pub relief_top: Option<usize>,
    pub relief_k: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            relief_top: None,
            relief_k: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage1Class {
    NonVoid,
    Void,
}

impl Stage1Class {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage1Class::NonVoid => "NON-VOID",
            Stage1Class::Void => "VOID",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageModel {
    pub stage1: MlpModel,
    pub stage2: MlpModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub trace_id: String,
    pub first_segment: usize,
    pub last_segment: usize,
    pub stage1: Option<Stage1Class>,
    pub stage2: Option<EventLabel>,
    pub cascaded: EventLabel,
    pub p_void: f64,
    pub p_abd: Option<f64>,
    pub p_do: Option<f64>,
}

/// Stage 1 target: 1 for VOID, 0 otherwise.
pub fn stage1_target(label: EventLabel) -> usize {
    usize::from(label == EventLabel::Void)
}

/// Stage 2 target: ABD 0, DO 1; other labels are not Stage 2 rows.
pub fn stage2_target(label: EventLabel) -> Option<usize> {
    match label {
        EventLabel::Abd => Some(0),
        EventLabel::Do => Some(1),
        _ => None,
    }
}

pub fn feature_matrix<E: EventLike>(events: &[&E]) -> Result<Matrix> {
    let rows: Vec<&[f64]> = events.iter().map(|e| e.features()).collect();
    Matrix::from_rows(&rows, N_FEATURES)
}

/// Stage 1 rows: every labeled event.
pub fn stage1_data(events: &[&Event]) -> Result<(Matrix, Vec<usize>)> {
    let labeled: Vec<&Event> = events.iter().copied().filter(|e| e.label != EventLabel::None).collect();
    let y = labeled.iter().map(|e| stage1_target(e.label)).collect();
    Ok((feature_matrix(&labeled)?, y))
}

/// Stage 2 rows: ground-truth ABD and DO events only.
pub fn stage2_data(events: &[&Event]) -> Result<(Matrix, Vec<usize>)> {
    let kept: Vec<&Event> = events.iter().copied().filter(|e| stage2_target(e.label).is_some()).collect();
    let y = kept.iter().filter_map(|e| stage2_target(e.label)).collect();
    Ok((feature_matrix(&kept)?, y))
}

pub fn three_class_data(events: &[&Event]) -> Result<(Matrix, Vec<usize>)> {
    let labeled: Vec<&Event> = events.iter().copied().filter(|e| e.label != EventLabel::None).collect();
    let y = labeled.iter().filter_map(|e| e.label.class_index()).collect();
    Ok((feature_matrix(&labeled)?, y))
}

fn require_classes(train: &[&Event]) -> Result<()> {
    for label in EventLabel::EVENTS {
        if !train.iter().any(|e| e.label == label) {
            return Err(Error::MissingClass(label.to_string()));
        }
    }
    Ok(())
}

/// Caps ReliefF's neighbour count so that every class has more rows
/// than neighbours requested (never below 1).
pub fn clamp_relief_k(labels: &[usize], classes: usize, k: usize) -> usize {
    let smallest = (0..classes)
        .map(|c| labels.iter().filter(|&&y| y == c).count())
        .min()
        .unwrap_or(0);
    k.min(smallest.saturating_sub(1)).max(1)
}

fn fit(x: &Matrix, y: &[usize], classes: usize, stage: StageTag, seed: u64, config: &PipelineConfig) -> Result<MlpModel> {
    let mut model = match config.relief_top {
        Some(n) if n < N_FEATURES => {
            let ranking = relieff_rank(x, y, clamp_relief_k(y, classes, config.relief_k))?;
            let mut model = MlpModel::standard(n, classes, stage, seed);
            model.source_dim = N_FEATURES;
            model.feature_index = ranking.top(n);
            model
        }
        _ => MlpModel::standard(x.cols(), classes, stage, seed),
    };
    model.seed = seed;
    let cfg = TrainConfig {
        seed,
        ..config.train.clone()
    };
    let (trained, curve) = train(&model, x, y, &cfg)?;
    log::debug!(
        "{stage}: {} rows, final epoch loss {:.4}",
        x.rows(),
        curve.last().copied().unwrap_or(f64::NAN)
    );
    Ok(trained)
}

/// Trains Stage 1 on all train events and Stage 2 on the train ABD/DO
/// events. Each stage fits its own scaler; the two run concurrently.
pub fn train_two_stage(events: &[Event], split: &SplitPlan, config: &PipelineConfig) -> Result<TwoStageModel> {
    let (train_events, _) = split.partition(events);
    require_classes(&train_events)?;
    let (x1, y1) = stage1_data(&train_events)?;
    let (x2, y2) = stage2_data(&train_events)?;
    let seed = config.train.seed;
    let (stage1, stage2) = rayon::join(
        || fit(&x1, &y1, 2, StageTag::Stage1, seed, config),
        || fit(&x2, &y2, 2, StageTag::Stage2, seed.wrapping_add(1), config),
    );
    Ok(TwoStageModel {
        stage1: stage1?,
        stage2: stage2?,
    })
}

/// One `[55, 128, 200, 3]` network over ABD, DO and VOID.
pub fn train_single_stage(events: &[Event], split: &SplitPlan, config: &PipelineConfig) -> Result<MlpModel> {
    let (train_events, _) = split.partition(events);
    require_classes(&train_events)?;
    let (x, y) = three_class_data(&train_events)?;
    fit(&x, &y, 3, StageTag::Single, config.train.seed.wrapping_add(2), config)
}

/// Stage 1 first; Stage 2 only on events Stage 1 calls non-VOID. A 0.5/0.5
/// tie at Stage 1 goes to Stage 2. Records are returned in input order.
pub fn predict_cascaded<E: EventLike>(model: &TwoStageModel, events: &[E]) -> Result<Vec<PredictionRecord>> {
    if events.is_empty() {
        return Ok(Vec::new());
    }
    let refs: Vec<&E> = events.iter().collect();
    let x = feature_matrix(&refs)?;
    let p1 = model.stage1.predict_proba(&x)?;
    let routed: Vec<usize> = (0..events.len()).filter(|&i| argmax(&p1[i]) == 0).collect();
    let mut p2: Vec<Option<Vec<f64>>> = vec![None; events.len()];
    if !routed.is_empty() {
        let probs = model.stage2.predict_proba(&x.select_rows(&routed))?;
        for (i, p) in routed.into_iter().zip(probs) {
            p2[i] = Some(p);
        }
    }
    Ok(events
        .iter()
        .zip(p1)
        .zip(p2)
        .map(|((e, p1), p2)| {
            let stage1 = if argmax(&p1) == 1 {
                Stage1Class::Void
            } else {
                Stage1Class::NonVoid
            };
            let stage2 = p2.as_ref().map(|p| if argmax(p) == 0 { EventLabel::Abd } else { EventLabel::Do });
            PredictionRecord {
                trace_id: e.trace_id().to_string(),
                first_segment: e.first_segment(),
                last_segment: e.last_segment(),
                stage1: Some(stage1),
                stage2,
                cascaded: stage2.unwrap_or(EventLabel::Void),
                p_void: p1[1],
                p_abd: p2.as_ref().map(|p| p[0]),
                p_do: p2.as_ref().map(|p| p[1]),
            }
        })
        .collect())
}

pub fn predict_single<E: EventLike>(model: &MlpModel, events: &[E]) -> Result<Vec<PredictionRecord>> {
    if events.is_empty() {
        return Ok(Vec::new());
    }
    let refs: Vec<&E> = events.iter().collect();
    let probs = model.predict_proba(&feature_matrix(&refs)?)?;
    Ok(events
        .iter()
        .zip(probs)
        .map(|(e, p)| PredictionRecord {
            trace_id: e.trace_id().to_string(),
            first_segment: e.first_segment(),
            last_segment: e.last_segment(),
            stage1: None,
            stage2: None,
            cascaded: EventLabel::EVENTS[argmax(&p)],
            p_void: p[2],
            p_abd: Some(p[0]),
            p_do: Some(p[1]),
        })
        .collect())
}

/// Three-class probabilities implied by the cascade:
/// `P(VOID)`, and `P(non-VOID)·P(ABD|non-VOID)` etc. Every event gets
/// Stage 2 scores here so that ROC curves cover all rows.
pub fn cascaded_probabilities(model: &TwoStageModel, x: &Matrix) -> Result<Vec<Vec<f64>>> {
    let p1 = model.stage1.predict_proba(x)?;
    let p2 = model.stage2.predict_proba(x)?;
    Ok(p1
        .iter()
        .zip(&p2)
        .map(|(a, b)| vec![a[0] * b[0], a[0] * b[1], a[1]])
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageEvaluation {
    pub stage1: EvaluationReport,
    /// Stage 2 on the ground-truth ABD/DO test events; `None` when there are none.
    pub stage2: Option<EvaluationReport>,
    pub cascaded: EvaluationReport,
}

pub fn evaluate_two_stage(model: &TwoStageModel, test: &[&Event]) -> Result<TwoStageEvaluation> {
    let (x1, y1) = stage1_data(test)?;
    let p1 = model.stage1.predict_proba(&x1)?;
    let pred1: Vec<usize> = p1.iter().map(|p| argmax(p)).collect();
    let stage1 = evaluate(&pred1, &y1, &STAGE1_CLASSES)?.with_scores(&p1, &y1)?;

    let (x2, y2) = stage2_data(test)?;
    let stage2 = if y2.is_empty() {
        None
    } else {
        let p2 = model.stage2.predict_proba(&x2)?;
        let pred2: Vec<usize> = p2.iter().map(|p| argmax(p)).collect();
        Some(evaluate(&pred2, &y2, &STAGE2_CLASSES)?.with_scores(&p2, &y2)?)
    };

    let cascaded = evaluate_cascaded(model, test)?;
    Ok(TwoStageEvaluation {
        stage1,
        stage2,
        cascaded,
    })
}

pub fn evaluate_cascaded(model: &TwoStageModel, test: &[&Event]) -> Result<EvaluationReport> {
    let (x, y) = three_class_data(test)?;
    let labeled: Vec<&Event> = test.iter().copied().filter(|e| e.label != EventLabel::None).collect();
    let owned: Vec<Event> = labeled.into_iter().cloned().collect();
    let records = predict_cascaded(model, &owned)?;
    let pred: Vec<usize> = records.iter().filter_map(|r| r.cascaded.class_index()).collect();
    let probs = cascaded_probabilities(model, &x)?;
    evaluate(&pred, &y, &THREE_CLASSES)?.with_scores(&probs, &y)
}

pub fn evaluate_single(model: &MlpModel, test: &[&Event]) -> Result<EvaluationReport> {
    let (x, y) = three_class_data(test)?;
    let probs = model.predict_proba(&x)?;
    let pred: Vec<usize> = probs.iter().map(|p| argmax(p)).collect();
    evaluate(&pred, &y, &THREE_CLASSES)?.with_scores(&probs, &y)
}

/// An unlabeled event found by [`propose_events`].
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub trace_id: String,
    pub first_segment: usize,
    pub last_segment: usize,
    pub features: Vec<f64>,
}

impl EventLike for Candidate {
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

fn median_of(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Segment spans `(first, last)` whose mean pressure exceeds a rolling
/// median of segment means by at least [`ACTIVITY_THRESHOLD`] for at least
/// [`MIN_CANDIDATE_SEGMENTS`] consecutive segments.
pub fn active_runs(samples: &[f64], fs: f64) -> Vec<(usize, usize)> {
    let means: Vec<f64> = samples
        .chunks_exact(SEGMENT_LEN)
        .map(|c| c.iter().sum::<f64>() / SEGMENT_LEN as f64)
        .collect();
    let half = (BASELINE_HALF_WINDOW_S * fs / SEGMENT_LEN as f64).round() as usize;
    let active: Vec<bool> = (0..means.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(means.len());
            means[i] - median_of(means[lo..hi].to_vec()) >= ACTIVITY_THRESHOLD
        })
        .collect();
    let mut runs = Vec::new();
    let mut i = 0;
    while i < active.len() {
        if !active[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < active.len() && active[i] {
            i += 1;
        }
        if i - start >= MIN_CANDIDATE_SEGMENTS {
            runs.push((start, i - 1));
        }
    }
    runs
}

/// Candidate events on a 10 Hz trace, each carrying the median of its
/// segment features. Annotations on the trace are ignored.
pub fn propose_events(trace: &Trace) -> Result<Vec<Candidate>> {
    if trace.fs() != CANONICAL_FS {
        return Err(Error::RateMismatch {
            expected: CANONICAL_FS,
            actual: trace.fs(),
        });
    }
    let runs = active_runs(trace.samples(), trace.fs());
    if runs.is_empty() {
        return Ok(Vec::new());
    }
    let segments = features::featurize_trace(&trace.without_annotations())?;
    Ok(runs
        .into_iter()
        .map(|(first, last)| {
            let rows: Vec<&[f64]> = segments[first..=last].iter().map(|s| s.features.as_slice()).collect();
            Candidate {
                trace_id: trace.trace_id().to_string(),
                first_segment: first,
                last_segment: last,
                features: column_median(&rows),
            }
        })
        .collect())
}

fn opt(v: Option<f64>) -> String {
    v.map(|p| p.to_string()).unwrap_or_default()
}

pub fn predictions_csv(records: &[PredictionRecord]) -> String {
    let mut out = String::from("trace_id,first_segment,last_segment,stage1,stage2,cascaded,p_void,p_abd,p_do\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.trace_id,
            r.first_segment,
            r.last_segment,
            r.stage1.map(Stage1Class::as_str).unwrap_or_default(),
            r.stage2.map(EventLabel::as_str).unwrap_or_default(),
            r.cascaded,
            r.p_void,
            opt(r.p_abd),
            opt(r.p_do),
        );
    }
    out
}

/// Per-sample `time_s,pves,actual_label,predicted_label` for one trace.
/// The actual label follows the segment labeling rule; samples outside
/// every predicted span are NONE.
pub fn overlay_csv(trace: &Trace, records: &[PredictionRecord]) -> String {
    let actual = features::segment_labels(trace);
    let mut predicted = vec![EventLabel::None; actual.len()];
    for r in records.iter().filter(|r| r.trace_id == trace.trace_id()) {
        for p in predicted.iter_mut().take(r.last_segment + 1).skip(r.first_segment) {
            *p = r.cascaded;
        }
    }
    let mut out = String::from("time_s,pves,actual_label,predicted_label\n");
    for (i, v) in trace.samples().iter().enumerate() {
        let seg = i / SEGMENT_LEN;
        let a = actual.get(seg).map_or(EventLabel::None, |b| b.label);
        let p = predicted.get(seg).copied().unwrap_or(EventLabel::None);
        let _ = writeln!(out, "{},{v},{a},{p}", trace.time_of(i));
    }
    out
}
