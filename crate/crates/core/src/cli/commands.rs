use std::path::{Path, PathBuf};

use log::info;

use crate::cli::config::RunConfig;
use crate::cli::manifest::{list_files, Run, RunManifest};
use crate::dwt;
use crate::error::{Error, Result};
use crate::eval::{self, report, EvaluationReport, PfiReport, PFI_REPEATS};
use crate::events::{self, DatasetManifest, Event, SplitPlan, SplitSpec};
use crate::features;
use crate::nn::{argmax, load_model, relieff_rank, save_model, Matrix, MlpModel};
use crate::pipeline::{self, Mode, PredictionRecord, TwoStageModel};
use crate::synth;
use crate::trace_io::{self, Trace};

/// Layout of a working directory.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
    pub fn traces(&self) -> PathBuf {
        self.root.join("traces")
    }
    pub fn datasets(&self) -> PathBuf {
        self.root.join("datasets.csv")
    }
    pub fn features(&self) -> PathBuf {
        self.root.join("features.csv")
    }
    pub fn events(&self) -> PathBuf {
        self.root.join("events.csv")
    }
    pub fn coefficients(&self) -> PathBuf {
        self.root.join("coefficients")
    }
    pub fn split(&self) -> PathBuf {
        self.root.join("split.csv")
    }
    pub fn model(&self, name: &str) -> PathBuf {
        self.root.join("models").join(format!("{name}.model"))
    }
    pub fn file(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
    pub fn overlays(&self) -> PathBuf {
        self.root.join("overlays")
    }
    pub fn inference(&self) -> PathBuf {
        self.root.join("inference")
    }
}

fn start(ws: &Workspace, command: &str, cfg: &RunConfig) -> Result<Run> {
    cfg.validate()?;
    Run::start(&ws.root, command, cfg.seed, cfg.hash())
}

/// Generates a synthetic corpus (trace files plus `datasets.csv`) in `out`.
pub fn synth(cfg: &RunConfig, out: &Path) -> Result<RunManifest> {
    let ws = Workspace::new(out);
    let mut run = start(&ws, "synth", cfg)?;
    let scfg = cfg.synth_config();
    let traces = synth::generate(&scfg)?;
    synth::write_corpus(&scfg, &traces, out)?;
    for f in list_files(out)? {
        run.output(&f)?;
    }
    info!("generated {} traces in {}", traces.len(), out.display());
    run.finish()
}

/// Loads a corpus, brings every trace to 10 Hz and stores it under
/// `traces/`. A `datasets.csv` next to the traces is carried over.
pub fn ingest(cfg: &RunConfig, corpus: &Path, ws: &Workspace) -> Result<RunManifest> {
    let mut run = start(ws, "ingest", cfg)?;
    let traces = load_corpus(&mut run, corpus)?;
    for t in &traces {
        trace_io::save_trace(t, &ws.traces())?;
        run.output(&trace_io::pves_path(&ws.traces(), t.trace_id()))?;
        run.output(&trace_io::events_path(&ws.traces(), t.trace_id()))?;
    }
    let datasets = corpus.join("datasets.csv");
    if datasets.is_file() {
        run.input(&datasets)?;
        let manifest = DatasetManifest::read_csv(&datasets)?;
        run.write(&ws.datasets(), &manifest.to_csv())?;
    }
    info!("ingested {} traces", traces.len());
    run.finish()
}

fn load_corpus(run: &mut Run, corpus: &Path) -> Result<Vec<Trace>> {
    if !corpus.is_dir() {
        return Err(Error::MissingArtifact(corpus.to_path_buf()));
    }
    for f in list_files(corpus)? {
        let name = f.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.ends_with(".pves.csv") || name.ends_with(".events.csv") {
            run.input(&f)?;
        }
    }
    let traces = trace_io::load_dir(corpus)?;
    traces
        .iter()
        .map(|t| trace_io::resample_to_10hz(t).map_err(|e| e.in_trace(t.trace_id())))
        .collect()
}

/// Segment features (`features.csv`) and events (`events.csv`); with
/// `dump_coefficients`, also the raw wavelet coefficients per trace.
pub fn featurize(cfg: &RunConfig, ws: &Workspace, dump_coefficients: bool) -> Result<RunManifest> {
    let mut run = start(ws, "featurize", cfg)?;
    run.input_dir(&ws.traces())?;
    let traces = trace_io::load_dir(&ws.traces())?;
    let matrix = features::extract_all(&traces)?;
    run.write(&ws.features(), &matrix.to_csv())?;
    let evs = events::build_events(&matrix);
    run.write(&ws.events(), &events::events_to_csv(&evs))?;
    if dump_coefficients {
        for t in &traces {
            let d = dwt::dwt5_db2(t.samples()).map_err(|e| e.in_trace(t.trace_id()))?;
            let mut buf = Vec::new();
            d.write_csv(&mut buf).map_err(|e| Error::io(ws.coefficients(), e))?;
            let body = String::from_utf8(buf).expect("coefficient dump is ASCII");
            run.write(&ws.coefficients().join(format!("{}.csv", t.trace_id())), &body)?;
        }
    }
    info!("{} segments, {} events", matrix.len(), evs.len());
    run.finish()
}

fn read_events(run: &mut Run, ws: &Workspace) -> Result<Vec<Event>> {
    run.input(&ws.events())?;
    events::read_events(&ws.events())
}

/// Splits events by trace, writes `split.csv`, trains the models for
/// `mode` and writes them plus ReliefF rankings of the training rows.
pub fn train(cfg: &RunConfig, ws: &Workspace) -> Result<RunManifest> {
    let mut run = start(ws, "train", cfg)?;
    let mode = cfg.mode()?;
    let evs = read_events(&mut run, ws)?;
    let spec = cfg.split_spec()?;
    let manifest = match spec {
        SplitSpec::Named { .. } => {
            run.input(&ws.datasets())?;
            Some(DatasetManifest::read_csv(&ws.datasets())?)
        }
        SplitSpec::Fraction(_) => None,
    };
    let plan = events::split_by_trace(&evs, &spec, manifest.as_ref(), cfg.seed)?;
    run.write(&ws.split(), &plan.to_csv())?;
    info!(
        "split {spec}: {} train traces, {} test traces",
        plan.train_trace_ids.len(),
        plan.test_trace_ids.len()
    );

    let pcfg = cfg.pipeline();
    let (train_events, _) = plan.partition(&evs);
    let names = features::feature_names();
    match mode {
        Mode::Single => {
            let model = pipeline::train_single_stage(&evs, &plan, &pcfg)?;
            save(&mut run, &model, &ws.model("single"))?;
            let (x, y) = pipeline::three_class_data(&train_events)?;
            run.write(&ws.file("relieff_single.csv"), &relieff_csv(&x, &y, 3, cfg.relief_k, &names)?)?;
        }
        Mode::TwoStage | Mode::Cascaded => {
            let model = pipeline::train_two_stage(&evs, &plan, &pcfg)?;
            save(&mut run, &model.stage1, &ws.model("stage1"))?;
            save(&mut run, &model.stage2, &ws.model("stage2"))?;
            let (x1, y1) = pipeline::stage1_data(&train_events)?;
            run.write(&ws.file("relieff_stage1.csv"), &relieff_csv(&x1, &y1, 2, cfg.relief_k, &names)?)?;
            let (x2, y2) = pipeline::stage2_data(&train_events)?;
            run.write(&ws.file("relieff_stage2.csv"), &relieff_csv(&x2, &y2, 2, cfg.relief_k, &names)?)?;
        }
    }
    run.finish()
}

fn save(run: &mut Run, model: &MlpModel, path: &Path) -> Result<()> {
    save_model(model, path)?;
    run.output(path)
}

fn relieff_csv(x: &Matrix, y: &[usize], classes: usize, k: usize, names: &[String]) -> Result<String> {
    let r = relieff_rank(x, y, pipeline::clamp_relief_k(y, classes, k))?;
    let mut out = String::from("rank,feature,weight\n");
    for (rank, &j) in r.order.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", rank + 1, names[j], r.weights[j]));
    }
    Ok(out)
}

enum Trained {
    Single(MlpModel),
    Cascade(TwoStageModel),
}

fn load_trained(run: &mut Run, ws: &Workspace, mode: Mode) -> Result<Trained> {
    let mut load = |name: &str| -> Result<MlpModel> {
        let path = ws.model(name);
        run.input(&path)?;
        load_model(&path)
    };
    Ok(match mode {
        Mode::Single => Trained::Single(load("single")?),
        Mode::TwoStage | Mode::Cascaded => Trained::Cascade(TwoStageModel {
            stage1: load("stage1")?,
            stage2: load("stage2")?,
        }),
    })
}

fn test_events(run: &mut Run, ws: &Workspace, cfg: &RunConfig) -> Result<(Vec<Event>, SplitPlan)> {
    let evs = read_events(run, ws)?;
    run.input(&ws.split())?;
    let plan = SplitPlan::read_csv(&ws.split(), cfg.seed)?;
    let test = evs.into_iter().filter(|e| plan.is_test(&e.trace_id)).collect();
    Ok((test, plan))
}

/// Metrics, confusion matrices, ROC points, per-event predictions and
/// per-trace overlays for the test side of the split.
pub fn evaluate(cfg: &RunConfig, ws: &Workspace) -> Result<RunManifest> {
    let mut run = start(ws, "evaluate", cfg)?;
    let mode = cfg.mode()?;
    let trained = load_trained(&mut run, ws, mode)?;
    let (test, plan) = test_events(&mut run, ws, cfg)?;
    let refs: Vec<&Event> = test.iter().collect();

    let (sections, records): (Vec<(&str, EvaluationReport)>, Vec<PredictionRecord>) = match (&trained, mode) {
        (Trained::Single(m), _) => (
            vec![("Single-stage", pipeline::evaluate_single(m, &refs)?)],
            pipeline::predict_single(m, &test)?,
        ),
        (Trained::Cascade(m), Mode::TwoStage) => {
            let r = pipeline::evaluate_two_stage(m, &refs)?;
            let mut s = vec![("Stage 1", r.stage1)];
            if let Some(s2) = r.stage2 {
                s.push(("Stage 2", s2));
            }
            s.push(("Cascaded", r.cascaded));
            (s, pipeline::predict_cascaded(m, &test)?)
        }
        (Trained::Cascade(m), _) => (
            vec![("Cascaded", pipeline::evaluate_cascaded(m, &refs)?)],
            pipeline::predict_cascaded(m, &test)?,
        ),
    };
    for (name, r) in &sections {
        info!("{name}: accuracy {:.3}, F1-macro {:.3}", r.overall_accuracy, r.f1_macro);
    }
    let view: Vec<(&str, &EvaluationReport)> = sections.iter().map(|(n, r)| (*n, r)).collect();
    run.write(&ws.file("metrics.csv"), &report::metrics_table_csv(&view))?;
    run.write(&ws.file("confusion.csv"), &report::confusion_csv(&view))?;
    run.write(&ws.file("roc.csv"), &report::roc_csv(&view))?;
    run.write(&ws.file("predictions.csv"), &pipeline::predictions_csv(&records))?;

    for id in &plan.test_trace_ids {
        let pves = trace_io::pves_path(&ws.traces(), id);
        run.input(&pves)?;
        let trace = trace_io::load_trace(&pves)?;
        run.write(
            &ws.overlays().join(format!("{id}.csv")),
            &pipeline::overlay_csv(&trace, &records),
        )?;
    }
    run.finish()
}

/// Permutation importance on the test events for every model of `mode`.
pub fn pfi(cfg: &RunConfig, ws: &Workspace) -> Result<RunManifest> {
    let mut run = start(ws, "pfi", cfg)?;
    let mode = cfg.mode()?;
    let trained = load_trained(&mut run, ws, mode)?;
    let (test, _) = test_events(&mut run, ws, cfg)?;
    let refs: Vec<&Event> = test.iter().collect();
    let names = features::feature_names();
    let seed = cfg.seed;

    let mut reports: Vec<(&str, PfiReport)> = Vec::new();
    match (&trained, mode) {
        (Trained::Single(m), _) => {
            let (x, y) = pipeline::three_class_data(&refs)?;
            reports.push(("single", eval::permutation_importance(|x| m.predict(x), &x, &y, &names, seed, PFI_REPEATS)?));
        }
        (Trained::Cascade(m), Mode::TwoStage) => {
            let (x1, y1) = pipeline::stage1_data(&refs)?;
            let r1 = eval::permutation_importance(|x| m.stage1.predict(x), &x1, &y1, &names, seed, PFI_REPEATS)?;
            reports.push(("stage1", r1));
            let (x2, y2) = pipeline::stage2_data(&refs)?;
            let r2 = eval::permutation_importance(|x| m.stage2.predict(x), &x2, &y2, &names, seed, PFI_REPEATS)?;
            reports.push(("stage2", r2));
        }
        (Trained::Cascade(m), _) => {
            let (x, y) = pipeline::three_class_data(&refs)?;
            let predict = |x: &Matrix| -> Result<Vec<usize>> {
                let p1 = m.stage1.predict_proba(x)?;
                let p2 = m.stage2.predict_proba(x)?;
                Ok(p1
                    .iter()
                    .zip(&p2)
                    .map(|(a, b)| if argmax(a) == 1 { 2 } else { argmax(b) })
                    .collect())
            };
            reports.push(("cascaded", eval::permutation_importance(predict, &x, &y, &names, seed, PFI_REPEATS)?));
        }
    }
    for (name, r) in &reports {
        let top: Vec<String> = r.top(3).into_iter().map(|(f, d)| format!("{f} ({d:.3})")).collect();
        info!("{name}: baseline {:.3}, top {}", r.baseline_accuracy, top.join(", "));
        run.write(&ws.file(&format!("pfi_{name}.csv")), &r.to_csv())?;
    }
    run.finish()
}

/// Classifies candidate events proposed on (unannotated) traces from
/// `corpus`; writes `inference/predictions.csv` and per-trace overlays.
pub fn predict(cfg: &RunConfig, corpus: &Path, ws: &Workspace) -> Result<RunManifest> {
    let mut run = start(ws, "predict", cfg)?;
    let mode = cfg.mode()?;
    let trained = load_trained(&mut run, ws, mode)?;
    let traces = load_corpus(&mut run, corpus)?;
    let mut all = Vec::new();
    for t in &traces {
        let candidates = pipeline::propose_events(t)?;
        let records = match &trained {
            Trained::Single(m) => pipeline::predict_single(m, &candidates)?,
            Trained::Cascade(m) => pipeline::predict_cascaded(m, &candidates)?,
        };
        run.write(
            &ws.inference().join("overlays").join(format!("{}.csv", t.trace_id())),
            &pipeline::overlay_csv(t, &records),
        )?;
        info!("{}: {} candidate events", t.trace_id(), records.len());
        all.extend(records);
    }
    run.write(&ws.inference().join("predictions.csv"), &pipeline::predictions_csv(&all))?;
    run.finish()
}
