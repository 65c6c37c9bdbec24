//! Pipeline stages. Each reads and writes fixed artifact names inside one
//! working directory and returns a deterministic summary line.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{seed_offset, Anchors, Config, Method, Source, SynthKind};
use crate::behavior::{
    detect as detect_rule_based, detect_ema, evaluate_detection, read_annotations, write_annotations,
    Annotation, DetectionMatch, SnippetClusterDetector,
};
use crate::clustering::{cluster as run_backend, read_assignments, write_assignments, Backend, ClusterAssignment};
use crate::cvqvae::{
    dims_for, grad_check, load_checkpoint, save_checkpoint, scenario_sample, scenario_set, toy_problem,
    train as train_model, write_history_csv, GradCheckOptions, GradCheckReport, LossWeights,
};
use crate::dataset::{load_dataset, save_dataset};
use crate::error::{Error, Result};
use crate::extraction::{augment_dataset, extract as extract_records, split, ExtractionSummary};
use crate::ingest::{
    filter_three_lane, generate_scenes, generate_synthetic, load_trajectories, normalize_direction,
    parse_recording_meta, parse_tracks, save_trajectories,
};
use crate::metrics::{
    augmentation_accuracy, classifier_entropy, cluster_entropy, report as build_report, ClusterScores,
    ClusteringResult,
};
use crate::types::{ChangePoint, InteractionMatrix, ScenarioRecord, Trajectory, N_CLASSES};

pub const TRAJECTORIES: &str = "trajectories.jsonl";
pub const ANNOTATIONS: &str = "annotations.csv";
pub const TRUTH_CHANGE_POINTS: &str = "truth_change_points.csv";
pub const CHANGE_POINTS: &str = "change_points.csv";
pub const DETECTION: &str = "detection.json";
pub const SCENARIOS: &str = "scenarios.jsonl";
pub const EXTRACTION: &str = "extraction.json";
pub const TRAIN: &str = "train.jsonl";
pub const VAL: &str = "val.jsonl";
pub const AUGMENTED: &str = "augmented.jsonl";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";
pub const METRICS_CSV: &str = "metrics.csv";
pub const GRADCHECK: &str = "gradcheck.json";

/// Training variant: without (`λ_cl = λ_int = 0`) or with domain knowledge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[value(name = "no_dk")]
    NoDk,
    Dk,
}

impl Variant {
    pub const ALL: [Variant; 2] = [Variant::NoDk, Variant::Dk];

    pub fn name(self) -> &'static str {
        match self {
            Variant::NoDk => "no_dk",
            Variant::Dk => "dk",
        }
    }

    pub fn checkpoint(self) -> String {
        format!("model_{}.ckpt", self.name())
    }

    pub fn loss_curve(self) -> String {
        format!("loss_{}.csv", self.name())
    }

    pub fn assignments(self) -> String {
        format!("assignments_{}.csv", self.name())
    }

    pub fn clustering(self) -> String {
        format!("clustering_{}.json", self.name())
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One line of `key=value` facts about a finished stage, plus an optional
/// notice for the operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub stage: String,
    pub fields: Vec<(String, String)>,
    pub notice: Option<String>,
}

impl Summary {
    pub fn new(stage: impl Into<String>) -> Self {
        Self { stage: stage.into(), fields: Vec::new(), notice: None }
    }

    pub fn field(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.fields.push((key.to_string(), value.to_string()));
        self
    }

    /// Adds the first 16 hex digits of the SHA-256 of `dir/name`.
    pub fn file(self, dir: &Path, name: &str) -> Result<Self> {
        let hash = file_hash(&dir.join(name))?;
        Ok(self.field(name, &hash[..16]))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.stage)?;
        for (k, v) in &self.fields {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

/// Hex SHA-256 of a file.
pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(require(path)?)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn require(path: &Path) -> Result<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact { path: path.to_path_buf() })
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(require(path)?)?;
    Ok(serde_json::from_str(&text)?)
}

fn load_records(path: &Path) -> Result<Vec<ScenarioRecord>> {
    Ok(load_dataset(require(path)?)?.1)
}

/// One change point of one vehicle, as stored in change point CSV files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangePointRow {
    pub recording_id: String,
    pub vehicle_id: i64,
    pub frame: i64,
    pub before: String,
    pub after: String,
}

impl ChangePointRow {
    fn new(traj: &Trajectory, cp: &ChangePoint) -> Self {
        Self {
            recording_id: traj.recording_id.clone(),
            vehicle_id: traj.vehicle_id,
            frame: cp.frame,
            before: cp.before.to_string(),
            after: cp.after.to_string(),
        }
    }

    pub fn change_point(&self) -> Result<ChangePoint> {
        Ok(ChangePoint { frame: self.frame, before: self.before.parse()?, after: self.after.parse()? })
    }
}

pub fn write_change_points(path: &Path, rows: &[ChangePointRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    if rows.is_empty() {
        w.write_record(["recording_id", "vehicle_id", "frame", "before", "after"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_change_points(path: &Path) -> Result<Vec<ChangePointRow>> {
    csv::Reader::from_reader(File::open(require(path)?)?)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

fn write_annotation_file(path: &Path, annotations: &[Annotation]) -> Result<()> {
    if annotations.is_empty() {
        let mut w = create(path)?;
        w.write_all(b"recording_id,vehicle_id,window_center_frame,composite_label\n")?;
        return Ok(w.flush()?);
    }
    write_annotations(create(path)?, annotations)
}

fn truth_rows(traj: &Trajectory, truth: &[ChangePoint]) -> (Vec<ChangePointRow>, Vec<Annotation>) {
    let rows: Vec<ChangePointRow> = truth.iter().map(|cp| ChangePointRow::new(traj, cp)).collect();
    let anns = rows
        .iter()
        .map(|r| Annotation {
            recording_id: r.recording_id.clone(),
            vehicle_id: r.vehicle_id,
            window_center_frame: r.frame,
            composite_label: r.after.clone(),
        })
        .collect();
    (rows, anns)
}

/// Generates a synthetic corpus: trajectories, annotations and the scripted
/// change points. Scenes annotate their ego only.
pub fn synth(cfg: &Config, dir: &Path) -> Result<Summary> {
    let seed = cfg.stage_seed(seed_offset::SYNTH);
    let mut trajectories = Vec::new();
    let mut rows = Vec::new();
    let mut annotations = Vec::new();
    match cfg.synth.kind {
        SynthKind::Scenes => {
            for scene in generate_scenes(cfg.synth.count, &cfg.scenes, cfg.dt, seed)? {
                let (r, a) = truth_rows(scene.ego(), &scene.ego_truth);
                rows.extend(r);
                annotations.extend(a);
                trajectories.extend(scene.trajectories);
            }
        }
        SynthKind::Maneuvers => {
            let scripts = cfg.maneuvers.sample(cfg.synth.count, seed);
            let (trajs, truths) = generate_synthetic(&scripts, cfg.dt, seed)?;
            for (t, truth) in trajs.iter().zip(&truths) {
                let (r, a) = truth_rows(t, truth);
                rows.extend(r);
                annotations.extend(a);
            }
            trajectories = trajs;
        }
    }
    std::fs::create_dir_all(dir)?;
    save_trajectories(&dir.join(TRAJECTORIES), &trajectories)?;
    write_annotation_file(&dir.join(ANNOTATIONS), &annotations)?;
    write_change_points(&dir.join(TRUTH_CHANGE_POINTS), &rows)?;
    Summary::new("synth")
        .field("kind", format!("{:?}", cfg.synth.kind).to_lowercase())
        .field("seed", seed)
        .field("trajectories", trajectories.len())
        .field("change_points", rows.len())
        .file(dir, TRAJECTORIES)?
        .file(dir, ANNOTATIONS)
}

/// Reads highD-layout recordings from `input`, keeps three-lane recordings
/// and normalizes every trajectory to drive towards +x.
pub fn ingest(cfg: &Config, input: Option<&Path>, dir: &Path) -> Result<Summary> {
    let input = input
        .or(cfg.highd.input.as_deref())
        .ok_or_else(|| Error::Config("ingest needs an input directory (highd.input)".into()))?;
    let mut metas: Vec<PathBuf> = std::fs::read_dir(require(input)?)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with("_recordingMeta.csv")))
        .collect();
    metas.sort();
    if metas.is_empty() {
        return Err(Error::Input(format!("no *_recordingMeta.csv file in {}", input.display())));
    }
    let mut recordings = Vec::new();
    for meta_path in metas {
        let name = meta_path.file_name().and_then(|n| n.to_str()).expect("filtered above");
        let prefix = name.trim_end_matches("_recordingMeta.csv");
        let meta = parse_recording_meta(File::open(&meta_path)?)?;
        recordings.push((meta, input.join(format!("{prefix}_tracks.csv"))));
    }
    let total = recordings.len();
    let kept = filter_three_lane(recordings);
    let mut trajectories = Vec::new();
    for (meta, tracks) in &kept {
        for t in parse_tracks(File::open(require(tracks)?)?, meta)? {
            trajectories.push(normalize_direction(&t, meta)?);
        }
    }
    std::fs::create_dir_all(dir)?;
    save_trajectories(&dir.join(TRAJECTORIES), &trajectories)?;
    Summary::new("ingest")
        .field("recordings", total)
        .field("three_lane", kept.len())
        .field("trajectories", trajectories.len())
        .file(dir, TRAJECTORIES)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEntry {
    pub method: String,
    #[serde(flatten)]
    pub scores: DetectionMatch,
}

/// Runs the rule-based detector on every trajectory. When annotations are
/// present, every configured method is scored on the annotated vehicles.
pub fn detect(cfg: &Config, dir: &Path) -> Result<Summary> {
    let trajectories = load_trajectories(require(&dir.join(TRAJECTORIES))?)?;
    let mut rows = Vec::new();
    let mut predicted: HashMap<(String, i64), Vec<ChangePoint>> = HashMap::new();
    for t in &trajectories {
        let (_, cps) = detect_rule_based(t, &cfg.detector);
        rows.extend(cps.iter().map(|cp| ChangePointRow::new(t, cp)));
        predicted.insert((t.recording_id.clone(), t.vehicle_id), cps);
    }
    write_change_points(&dir.join(CHANGE_POINTS), &rows)?;
    let mut summary = Summary::new("detect")
        .field("trajectories", trajectories.len())
        .field("change_points", rows.len())
        .file(dir, CHANGE_POINTS)?;

    let ann_path = dir.join(ANNOTATIONS);
    if !ann_path.exists() {
        summary.notice = Some(format!("no {ANNOTATIONS}; detection scores skipped"));
        return Ok(summary);
    }
    let mut truth: BTreeMap<(String, i64), Vec<(i64, crate::types::CompositeLabel)>> = BTreeMap::new();
    for a in read_annotations(File::open(&ann_path)?)? {
        let label = a.label()?;
        truth.entry((a.recording_id, a.vehicle_id)).or_default().push((a.window_center_frame, label));
    }
    let annotated: Vec<&Trajectory> = trajectories
        .iter()
        .filter(|t| truth.contains_key(&(t.recording_id.clone(), t.vehicle_id)))
        .collect();
    let key = |t: &Trajectory| (t.recording_id.clone(), t.vehicle_id);
    let mut entries = Vec::new();
    for &method in &cfg.detect.methods {
        let preds: Vec<Vec<(i64, Option<crate::types::CompositeLabel>)>> = match method {
            Method::RuleBased => annotated
                .iter()
                .map(|t| predicted[&key(t)].iter().map(|c| (c.frame, Some(c.after))).collect())
                .collect(),
            Method::Ema => annotated
                .iter()
                .map(|t| detect_ema(t, &cfg.ema).into_iter().map(|f| (f, None)).collect())
                .collect(),
            Method::Snippet => {
                let mut sc = cfg.snippet.clone();
                sc.train.seed = cfg.stage_seed(seed_offset::SNIPPET);
                let owned: Vec<Trajectory> = annotated.iter().map(|&t| t.clone()).collect();
                let detector = SnippetClusterDetector::fit(&owned, &sc)?;
                annotated
                    .iter()
                    .map(|t| Ok(detector.detect(t)?.into_iter().map(|f| (f, None)).collect()))
                    .collect::<Result<_>>()?
            }
        };
        let scores = annotated
            .iter()
            .zip(&preds)
            .map(|(t, p)| evaluate_detection(p, &truth[&key(t)], cfg.detect.window))
            .fold(DetectionMatch::default(), DetectionMatch::combine);
        entries.push(DetectionEntry { method: method.display_name().to_string(), scores });
    }
    write_json(&dir.join(DETECTION), &entries)?;
    for e in &entries {
        summary = summary.field(
            &e.method.to_lowercase().replace(' ', "_"),
            format!("{:.3}/{:.3}", e.scores.precision, e.scores.recall),
        );
    }
    summary.file(dir, DETECTION)
}

/// Turns change points into scenario records.
pub fn extract(cfg: &Config, dir: &Path) -> Result<Summary> {
    let trajectories = load_trajectories(require(&dir.join(TRAJECTORIES))?)?;
    let anchor_file = match cfg.extract.anchors {
        Anchors::Detected => CHANGE_POINTS,
        Anchors::Truth => TRUTH_CHANGE_POINTS,
    };
    let mut anchors: BTreeMap<String, BTreeMap<i64, Vec<ChangePoint>>> = BTreeMap::new();
    for r in read_change_points(&dir.join(anchor_file))? {
        let cp = r.change_point()?;
        anchors.entry(r.recording_id).or_default().entry(r.vehicle_id).or_default().push(cp);
    }
    let mut by_recording: BTreeMap<String, Vec<Trajectory>> = BTreeMap::new();
    for t in trajectories {
        by_recording.entry(t.recording_id.clone()).or_default().push(t);
    }
    let mut records = Vec::new();
    let mut summary_all = ExtractionSummary::default();
    for (rec, trajs) in &by_recording {
        let Some(cps) = anchors.get(rec) else { continue };
        let (r, s) = extract_records(trajs, cps, &cfg.extraction, &cfg.dgsfm);
        records.extend(r);
        summary_all.merge(&s);
    }
    save_dataset(&dir.join(SCENARIOS), cfg.dt, &records)?;
    write_json(&dir.join(EXTRACTION), &summary_all)?;
    let mut summary = Summary::new("extract")
        .field("anchors", anchor_file)
        .field("records", records.len())
        .field("filtered", summary_all.filtered)
        .field("skipped_windows", summary_all.skipped_windows)
        .file(dir, SCENARIOS)?;
    if records.is_empty() {
        summary.notice = Some(format!(
            "no scenario extracted: {} change points rejected by class_filter, {} without window coverage",
            summary_all.filtered, summary_all.skipped_windows
        ));
    }
    Ok(summary)
}

/// Splits the originals and augments train-split records with an
/// irrelevant distant vehicle.
pub fn augment(cfg: &Config, dir: &Path) -> Result<Summary> {
    let records = load_records(&dir.join(SCENARIOS))?;
    let originals: Vec<ScenarioRecord> = records.into_iter().filter(|r| r.augmentation.is_none()).collect();
    let split_seed = cfg.stage_seed(seed_offset::SPLIT);
    let (train, val) = split(&originals, cfg.split.train_fraction, split_seed)?;
    let donors = load_trajectories(require(&dir.join(TRAJECTORIES))?)?;
    let aug_seed = cfg.stage_seed(seed_offset::AUGMENT);
    let children = augment_dataset(&train, &donors, &cfg.augment, aug_seed)?;
    save_dataset(&dir.join(TRAIN), cfg.dt, &train)?;
    save_dataset(&dir.join(VAL), cfg.dt, &val)?;
    save_dataset(&dir.join(AUGMENTED), cfg.dt, &children)?;
    Summary::new("augment")
        .field("split_seed", split_seed)
        .field("augment_seed", aug_seed)
        .field("train", train.len())
        .field("val", val.len())
        .field("augmented", children.len())
        .file(dir, TRAIN)?
        .file(dir, AUGMENTED)
}

fn train_config(cfg: &Config, variant: Variant) -> crate::cvqvae::TrainConfig {
    let mut tc = cfg.train.clone();
    tc.seed = cfg.stage_seed(seed_offset::TRAIN);
    if variant == Variant::NoDk {
        tc.lambda_cl = 0.0;
        tc.lambda_int = 0.0;
    }
    tc
}

/// Trains one model variant on the train split.
pub fn train(cfg: &Config, variant: Variant, dir: &Path) -> Result<Summary> {
    let records = load_records(&dir.join(TRAIN))?;
    let set = scenario_set(&records);
    let dims = dims_for(&set, &cfg.model, N_CLASSES, InteractionMatrix::LEN);
    let tc = train_config(cfg, variant);
    let outcome = train_model(&set, dims, &tc)?;
    save_checkpoint(&dir.join(variant.checkpoint()), &outcome.params)?;
    write_history_csv(create(&dir.join(variant.loss_curve()))?, &outcome.history)?;
    let last = outcome.history.last().map(|h| h.loss.total).unwrap_or(f64::NAN);
    Summary::new(format!("train[{variant}]"))
        .field("seed", tc.seed)
        .field("samples", records.len())
        .field("epochs", outcome.history.len())
        .field("loss", format!("{last:.6}"))
        .file(dir, &variant.checkpoint())
}

/// Train-split originals followed by their augmented variants.
fn evaluation_set(dir: &Path) -> Result<(Vec<ScenarioRecord>, Vec<(String, String)>)> {
    let mut records = load_records(&dir.join(TRAIN))?;
    let children = load_records(&dir.join(AUGMENTED))?;
    let pairs = children
        .iter()
        .filter_map(|c| c.augmentation_parent().map(|p| (p.to_string(), c.id.clone())))
        .collect();
    records.extend(children);
    Ok((records, pairs))
}

/// Assigns the evaluation set to clusters with every configured backend.
pub fn cluster(cfg: &Config, variant: Variant, dir: &Path) -> Result<Summary> {
    let model = load_checkpoint(&dir.join(variant.checkpoint()))?;
    let (records, _) = evaluation_set(dir)?;
    let inputs: Vec<&[f64]> = records.iter().map(|r| r.tensor.values()).collect();
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let seed = cfg.stage_seed(seed_offset::KMEANS);
    let assignments = cfg
        .clustering
        .backends
        .iter()
        .map(|&b| run_backend(b, &inputs, &model, &cfg.clustering, seed))
        .collect::<Result<Vec<_>>>()?;
    write_assignments(create(&dir.join(variant.assignments()))?, &ids, &assignments)?;
    Summary::new(format!("cluster[{variant}]"))
        .field("seed", seed)
        .field("records", records.len())
        .field("backends", assignments.len())
        .file(dir, &variant.assignments())
}

/// Purity entropy and augmentation accuracy per backend.
pub fn evaluate(cfg: &Config, variant: Variant, dir: &Path) -> Result<Summary> {
    let (records, pairs) = evaluation_set(dir)?;
    let model = load_checkpoint(&dir.join(variant.checkpoint()))?;
    let rows = read_assignments(File::open(require(&dir.join(variant.assignments()))?)?)?;
    let index: HashMap<&str, usize> = records.iter().enumerate().map(|(i, r)| (r.id.as_str(), i)).collect();
    let mut labels: BTreeMap<Backend, Vec<Option<usize>>> = BTreeMap::new();
    for row in &rows {
        let i = *index.get(row.record_id.as_str()).ok_or_else(|| {
            Error::Input(format!("assignment for unknown record {}", row.record_id))
        })?;
        labels.entry(row.backend).or_insert_with(|| vec![None; records.len()])[i] = Some(row.label);
    }
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let classes: Vec<_> = records.iter().map(|r| r.pseudo_class).collect();
    let dk = variant == Variant::Dk;
    let mut results = Vec::new();
    for (backend, l) in labels {
        let labels: Vec<usize> = l
            .into_iter()
            .enumerate()
            .map(|(i, x)| x.ok_or_else(|| Error::Input(format!("record {} has no {backend} label", ids[i]))))
            .collect::<Result<_>>()?;
        let k = cfg.clustering.k.unwrap_or(model.dims.codebook_size);
        let q = if backend == Backend::Codebook { model.dims.codebook_size } else { k };
        let a = ClusterAssignment { backend, q: q.max(labels.iter().max().map_or(0, |m| m + 1)), labels };
        let purity = cluster_entropy(&a, &classes)?.h_avg;
        let accuracy = augmentation_accuracy(&ids, &a, &pairs)?;
        let clf = if dk && backend == Backend::Codebook && train_config(cfg, variant).lambda_cl > 0.0 {
            Some(classifier_entropy(&a, &model)?)
        } else {
            None
        };
        results.push(ClusteringResult { backend, domain_knowledge: dk, scores: ClusterScores::new(purity, accuracy, clf) });
    }
    write_json(&dir.join(variant.clustering()), &results)?;
    let acc = |b: Backend| results.iter().find(|r| r.backend == b).map(|r| r.scores.accuracy);
    let mut summary = Summary::new(format!("evaluate[{variant}]")).field("pairs", pairs.len());
    for r in &results {
        summary = summary.field(
            r.backend.name(),
            format!("{:.3}/{:.3}", r.scores.purity, r.scores.accuracy),
        );
    }
    if let (true, Some(cb), Some(km)) = (dk, acc(Backend::Codebook), acc(Backend::KMeans)) {
        if cb < km {
            let msg = format!("codebook augmentation accuracy {cb:.3} is below k-means {km:.3}");
            log::warn!("{msg}");
            summary.notice = Some(format!("warning: {msg}"));
        }
    }
    summary.file(dir, &variant.clustering())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct MetricRow {
    variant: String,
    backend: String,
    purity: f64,
    accuracy: f64,
    classifier_purity: Option<f64>,
}

/// Renders the detection and clustering tables from whatever evaluation
/// artifacts exist.
pub fn report(dir: &Path) -> Result<Summary> {
    let det_path = dir.join(DETECTION);
    let detection: Vec<(String, DetectionMatch)> = if det_path.exists() {
        read_json::<Vec<DetectionEntry>>(&det_path)?.into_iter().map(|e| (e.method, e.scores)).collect()
    } else {
        Vec::new()
    };
    let mut clustering: Vec<ClusteringResult> = Vec::new();
    for v in Variant::ALL {
        let p = dir.join(v.clustering());
        if p.exists() {
            clustering.extend(read_json::<Vec<ClusteringResult>>(&p)?);
        }
    }
    if detection.is_empty() && clustering.is_empty() {
        return Err(Error::MissingArtifact { path: dir.join(Variant::Dk.clustering()) });
    }
    let rep = build_report(&detection, &clustering);
    std::fs::write(dir.join(REPORT_JSON), rep.to_json()? + "\n")?;
    std::fs::write(dir.join(REPORT_TEXT), rep.to_text())?;
    let mut w = csv::Writer::from_writer(create(&dir.join(METRICS_CSV))?);
    let mut metric_rows: Vec<MetricRow> = clustering
        .iter()
        .map(|c| MetricRow {
            variant: if c.domain_knowledge { "dk" } else { "no_dk" }.into(),
            backend: c.backend.name().into(),
            purity: c.scores.purity,
            accuracy: c.scores.accuracy,
            classifier_purity: c.scores.classifier_purity,
        })
        .collect();
    metric_rows.sort_by(|a, b| (&a.variant, &a.backend).cmp(&(&b.variant, &b.backend)));
    if metric_rows.is_empty() {
        w.write_record(["variant", "backend", "purity", "accuracy", "classifier_purity"])?;
    }
    for r in &metric_rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Summary::new("report")
        .field("detection_rows", detection.len())
        .field("clustering_results", clustering.len())
        .file(dir, REPORT_JSON)?
        .file(dir, REPORT_TEXT)
}

/// Finite-difference check of the analytic gradients, either on the toy
/// problem or on a trained variant and the first train records.
pub fn gradcheck(cfg: &Config, variant: Option<Variant>, dir: &Path) -> Result<(Summary, GradCheckReport)> {
    let opts = GradCheckOptions {
        epsilon: cfg.gradcheck.epsilon,
        n_params: cfg.gradcheck.n_params,
        seed: cfg.seed,
        corrupt: None,
    };
    let (params, samples, weights, source) = match variant {
        None => {
            let (p, s) = toy_problem(vec![16], cfg.seed);
            let w = LossWeights { lambda_cl: 1.0, lambda_int: 1.0, commitment: cfg.train.commitment_weight };
            (p, s, w, "toy".to_string())
        }
        Some(v) => {
            let p = load_checkpoint(&dir.join(v.checkpoint()))?;
            let records = load_records(&dir.join(TRAIN))?;
            let s: Vec<_> = records.iter().take(cfg.gradcheck.n_samples).map(scenario_sample).collect();
            (p, s, train_config(cfg, v).loss_weights(), v.name().to_string())
        }
    };
    let report = grad_check(&params, &samples, &weights, &opts)?;
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join(GRADCHECK), &report)?;
    let summary = Summary::new("gradcheck")
        .field("model", source)
        .field("checked", report.checks.len())
        .field("max_rel_error", format!("{:.3e}", report.max_rel_error));
    if !(report.max_rel_error < cfg.gradcheck.tolerance) {
        let worst: BTreeSet<&str> = report
            .per_tensor
            .iter()
            .filter(|(_, &e)| !(e < cfg.gradcheck.tolerance))
            .map(|(k, _)| k.as_str())
            .collect();
        return Err(Error::Check(format!(
            "max relative gradient error {:.3e} exceeds {:.1e} in {:?}",
            report.max_rel_error, cfg.gradcheck.tolerance, worst
        )));
    }
    Ok((summary, report))
}

/// Every stage in order, both variants.
pub fn pipeline(cfg: &Config, dir: &Path) -> Result<Vec<Summary>> {
    let mut out = vec![match cfg.source {
        Source::Synth => synth(cfg, dir)?,
        Source::Highd => ingest(cfg, None, dir)?,
    }];
    out.push(detect(cfg, dir)?);
    out.push(extract(cfg, dir)?);
    out.push(augment(cfg, dir)?);
    for v in Variant::ALL {
        out.push(train(cfg, v, dir)?);
    }
    for v in Variant::ALL {
        out.push(cluster(cfg, v, dir)?);
        out.push(evaluate(cfg, v, dir)?);
    }
    out.push(report(dir)?);
    Ok(out)
}
