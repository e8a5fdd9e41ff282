//! Staged experiment runner. Stages exchange data only through files under
//! the output directory, so each stage can run on its own.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::report::{self, EvalRecord, RunKey, METRICS_FILE};
use crate::eval::render_taylor;
use crate::gbtree::GbtModel;
use crate::ingest::{self, reader, writer, DATE_FORMAT};
use crate::interpolate::{self, attention, AttentionHyper, PseudoLabelSeries};
use crate::learning::{self, CellStatus, LearningConfig, LearningMethod};
use crate::model::{composite_from_subscales, validate_cohort, ParticipantId, SensorReading, SplitDataset, SubscaleId, Technique, VisitScore};
use crate::par;
use crate::preprocess::{self, FeatureFrame, PeriodWindow, Scaler};
use crate::rng::derive_seed;
use crate::synth::{self, SynthConfig};
use crate::tuning;

pub const RUNS_FILE: &str = "runs.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const FEATURES_FILE: &str = "features.csv";
pub const SCALER_FILE: &str = "scaler.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSource {
    /// Generate a cohort from the `[synth]` table.
    Synth,
    /// Read an existing cohort.
    Csv { sensors: PathBuf, visits: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; required.
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub input: InputSource,
    pub period: PeriodWindow,
    pub collinearity_threshold: f64,
    pub techniques: Vec<Technique>,
    pub methods: Vec<LearningMethod>,
    pub subscales: Vec<SubscaleId>,
    pub attention: AttentionHyper,
    pub learning: LearningConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: Some(42),
            out_dir: PathBuf::from("out"),
            input: InputSource::Synth,
            period: PeriodWindow::default(),
            collinearity_threshold: preprocess::DEFAULT_COLLINEARITY_THRESHOLD,
            techniques: Technique::ALL.to_vec(),
            methods: LearningMethod::ALL.to_vec(),
            subscales: SubscaleId::ALL.to_vec(),
            attention: AttentionHyper::default(),
            learning: LearningConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::Config("seed is required".into()))
    }

    pub fn validate(&self) -> Result<()> {
        self.seed()?;
        if self.techniques.is_empty() {
            return Err(Error::Config("select at least one interpolation technique".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("select at least one learning method".into()));
        }
        if self.subscales.is_empty() {
            return Err(Error::Config("select at least one subscale".into()));
        }
        if !(0.0..=1.0).contains(&self.collinearity_threshold) {
            return Err(Error::Config("collinearity_threshold must lie in [0, 1]".into()));
        }
        self.attention.validate()?;
        self.learning.validate()?;
        if self.input == InputSource::Synth {
            self.synth.validate()?;
        }
        Ok(())
    }
}

/// Optional restrictions on which grid cells a stage processes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Filters {
    pub participants: Vec<String>,
    pub subscales: Vec<SubscaleId>,
    pub techniques: Vec<Technique>,
    pub methods: Vec<LearningMethod>,
}

impl Filters {
    fn participant(&self, p: &ParticipantId) -> bool {
        self.participants.is_empty() || self.participants.iter().any(|q| q == p.as_str())
    }

    fn subscale(&self, s: SubscaleId) -> bool {
        self.subscales.is_empty() || self.subscales.contains(&s)
    }

    fn technique(&self, t: Technique) -> bool {
        self.techniques.is_empty() || self.techniques.contains(&t)
    }

    fn method(&self, m: LearningMethod) -> bool {
        self.methods.is_empty() || self.methods.contains(&m)
    }
}

/// File layout under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn cohort_dir(&self) -> PathBuf {
        self.root.join("cohort")
    }

    pub fn features_dir(&self, p: &ParticipantId) -> PathBuf {
        self.root.join("features").join(p.as_str())
    }

    pub fn labels_dir(&self, p: &ParticipantId) -> PathBuf {
        self.root.join("labels").join(p.as_str())
    }

    pub fn labels_file(&self, p: &ParticipantId, s: SubscaleId, t: Technique) -> PathBuf {
        self.labels_dir(p).join(PseudoLabelSeries::file_name(s, t))
    }

    pub fn attention_model(&self, p: &ParticipantId, s: SubscaleId, channel: &str) -> PathBuf {
        self.labels_dir(p).join("attention").join(format!("{s}_{channel}.json"))
    }

    fn run_stem(key: &RunKey) -> String {
        format!("{}_{}_{}", key.subscale, key.technique, key.method)
    }

    /// Path relative to the root.
    pub fn model_rel(key: &RunKey) -> PathBuf {
        Path::new("models").join(key.participant.as_str()).join(format!("{}.json", Self::run_stem(key)))
    }

    pub fn predictions_rel(key: &RunKey) -> PathBuf {
        Path::new("predictions")
            .join(key.participant.as_str())
            .join(format!("{}.csv", Self::run_stem(key)))
    }

    pub fn tuning_file(&self, key: &RunKey) -> PathBuf {
        self.root
            .join("tuning")
            .join(key.participant.as_str())
            .join(format!("{}.csv", Self::run_stem(key)))
    }

    pub fn runs_file(&self) -> PathBuf {
        self.root.join(RUNS_FILE)
    }

    pub fn metrics_file(&self) -> PathBuf {
        self.root.join(METRICS_FILE)
    }

    pub fn table_file(&self, n: u32) -> PathBuf {
        self.root.join(format!("table{n}.csv"))
    }

    pub fn taylor_dir(&self) -> PathBuf {
        self.root.join("taylor")
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) => ensure_dir(p),
        None => Ok(()),
    }
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact(path.to_path_buf()))
    }
}

fn read_cohort(layout: &Layout) -> Result<(Vec<SensorReading>, Vec<VisitScore>)> {
    ingest::read_cohort_dir(&layout.cohort_dir())
}

fn participants_of(visits: &[VisitScore]) -> Vec<ParticipantId> {
    let mut ids: Vec<ParticipantId> = visits.iter().map(|v| v.participant.clone()).collect();
    ids.sort();
    ids.dedup();
    ids
}

/// Writes `cohort/sensors.csv` and `cohort/visits.csv`.
pub fn stage_synth(cfg: &RunConfig) -> Result<()> {
    let layout = Layout::new(&cfg.out_dir);
    let dir = layout.cohort_dir();
    ensure_dir(&dir)?;
    let (readings, visits) = match &cfg.input {
        InputSource::Synth => {
            let mut synth_cfg = cfg.synth.clone();
            synth_cfg.seed = derive_seed(cfg.seed()?, "synth");
            let cohort = synth::generate_cohort(&synth_cfg)?;
            (cohort.readings, cohort.visits)
        }
        InputSource::Csv { sensors, visits } => {
            (ingest::read_sensors(sensors)?, with_composites(ingest::read_visits(visits)?)?)
        }
    };
    let report = validate_cohort(&readings, &visits);
    if !report.ok() {
        return Err(Error::InvalidInput(format!("cohort failed validation: {:?}", report.findings)));
    }
    let [s, v] = ingest::cohort_paths(&dir);
    ingest::write_sensors(&s, &readings)?;
    ingest::write_visits(&v, &visits)?;
    log::info!("cohort: {} readings, {} visit scores", readings.len(), visits.len());
    Ok(())
}

/// Adds a Composite score for each participant visit that has all twelve
/// items but no Composite row.
fn with_composites(mut visits: Vec<VisitScore>) -> Result<Vec<VisitScore>> {
    let mut by_visit: BTreeMap<(ParticipantId, NaiveDate), Vec<VisitScore>> = BTreeMap::new();
    for v in &visits {
        by_visit.entry((v.participant.clone(), v.date)).or_default().push(v.clone());
    }
    for group in by_visit.into_values() {
        let has_composite = group.iter().any(|v| v.subscale.is_composite());
        if !has_composite && group.len() == SubscaleId::ITEMS.len() {
            visits.push(composite_from_subscales(&group)?);
        }
    }
    Ok(visits)
}

/// Dates that can carry a label: feature dates inside the visit span.
fn label_dates(frame: &FeatureFrame, visits: &[VisitScore]) -> Vec<NaiveDate> {
    let Some(span) = interpolate::visit_span(visits) else {
        return Vec::new();
    };
    let (first, last) = (span[0], span[span.len() - 1]);
    frame.dates.iter().copied().filter(|d| *d >= first && *d <= last).collect()
}

/// Rows of `frames` restricted to their shared columns, stacked in order.
fn stack(frames: &[FeatureFrame]) -> FeatureFrame {
    let mut common: Vec<String> = frames.first().map(|f| f.columns.clone()).unwrap_or_default();
    for f in frames {
        common.retain(|c| f.columns.contains(c));
    }
    let mut out = FeatureFrame::empty(ParticipantId::new("cohort"));
    out.columns = common.clone();
    for f in frames {
        let keep: Vec<usize> = common
            .iter()
            .map(|c| f.columns.iter().position(|x| x == c).expect("shared column"))
            .collect();
        let sel = f.select_columns(&keep);
        out.dates.extend(sel.dates);
        out.values.extend(sel.values);
    }
    out
}

fn select_named(frame: &FeatureFrame, names: &[String]) -> FeatureFrame {
    let keep: Vec<usize> = names
        .iter()
        .filter_map(|c| frame.columns.iter().position(|x| x == c))
        .collect();
    frame.select_columns(&keep)
}

/// Daily summaries per participant, then one column set and one scaler for
/// the whole cohort: collinearity pruning runs on every participant's rows
/// and the scaler is fit on the union of their training dates.
pub fn stage_preprocess(cfg: &RunConfig) -> Result<()> {
    let layout = Layout::new(&cfg.out_dir);
    let (readings, visits) = read_cohort(&layout)?;
    let ids = participants_of(&visits);
    let summaries = par::map(&ids, |p| -> Result<(FeatureFrame, FeatureFrame)> {
        let own: Vec<SensorReading> = readings.iter().filter(|r| &r.participant == p).cloned().collect();
        let own_visits: Vec<VisitScore> = visits.iter().filter(|v| &v.participant == p).cloned().collect();
        let mut summary = preprocess::segment_and_summarize(&own, &cfg.period);
        summary.participant = p.clone();
        let dir = layout.features_dir(p);
        ensure_dir(&dir)?;
        summary.write_csv(&dir.join(SUMMARY_FILE))?;
        let dates = label_dates(&summary, &own_visits);
        let (n_train, _) = learning::split_sizes(dates.len())?;
        let (first, last) = (dates[0], dates[n_train - 1]);
        let train = summary.filter_rows(|d| d >= first && d <= last);
        Ok((summary, train))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let (full, train): (Vec<FeatureFrame>, Vec<FeatureFrame>) = summaries.into_iter().unzip();
    let (pruned, dropped) = preprocess::prune_collinear(&stack(&full), cfg.collinearity_threshold);
    log::info!("{} columns kept, {} dropped", pruned.columns.len(), dropped.len());
    let scaler = Scaler::fit(&select_named(&stack(&train), &pruned.columns))?;
    scaler.write_csv(&layout.root.join("features").join(SCALER_FILE))?;
    for (p, frame) in ids.iter().zip(&full) {
        let scaled = scaler.apply(&select_named(frame, &pruned.columns))?;
        scaled.write_csv(&layout.features_dir(p).join(FEATURES_FILE))?;
    }
    Ok(())
}

fn read_features(layout: &Layout, p: &ParticipantId) -> Result<FeatureFrame> {
    let path = layout.features_dir(p).join(FEATURES_FILE);
    require(&path)?;
    FeatureFrame::read_csv(&path, p.clone())
}

fn visits_for(visits: &[VisitScore], p: &ParticipantId, s: SubscaleId) -> Vec<VisitScore> {
    let mut v: Vec<VisitScore> = visits
        .iter()
        .filter(|v| &v.participant == p && v.subscale == s)
        .cloned()
        .collect();
    v.sort_by_key(|v| v.date);
    v
}

fn interpolate_one(
    cfg: &RunConfig,
    layout: &Layout,
    frame: &FeatureFrame,
    visits: &[VisitScore],
    technique: Technique,
    seed: u64,
) -> Result<PseudoLabelSeries> {
    let dates = label_dates(frame, visits);
    match technique {
        Technique::Linear => interpolate::interp_linear(visits, &dates),
        Technique::Cubic => interpolate::interp_cubic(visits, &dates),
        Technique::SelfAttention => {
            let subscale = visits[0].subscale;
            let p = &frame.participant;
            let mut members = Vec::new();
            for channel in frame.channels() {
                let table = frame.channel_table(&channel);
                let hyper = AttentionHyper {
                    seed: derive_seed(seed, &format!("{p}|{subscale}|{channel}")),
                    ..cfg.attention
                };
                let model = attention::train_attention_interpolator(&table, visits, hyper)?;
                let path = layout.attention_model(p, subscale, &channel);
                ensure_parent(&path)?;
                model.save(&path)?;
                members.push(attention::attention_interpolate(&model, &dates)?);
            }
            interpolate::ensemble_average(&members)
        }
    }
}

/// Daily pseudo-labels for every participant, subscale and technique.
pub fn stage_interpolate(cfg: &RunConfig, filters: &Filters) -> Result<()> {
    let layout = Layout::new(&cfg.out_dir);
    let visits = ingest::read_visits(&ingest::cohort_paths(&layout.cohort_dir())[1])?;
    let seed = cfg.seed()?;
    let ids: Vec<ParticipantId> = participants_of(&visits).into_iter().filter(|p| filters.participant(p)).collect();
    let frames = ids
        .iter()
        .map(|p| read_features(&layout, p).map(|f| (p.clone(), f)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let mut tasks = Vec::new();
    for p in &ids {
        for &s in cfg.subscales.iter().filter(|s| filters.subscale(**s)) {
            for &t in cfg.techniques.iter().filter(|t| filters.technique(**t)) {
                tasks.push((p.clone(), s, t));
            }
        }
    }
    let results = par::map(&tasks, |(p, s, t)| -> Result<()> {
        let v = visits_for(&visits, p, *s);
        let series = interpolate_one(cfg, &layout, &frames[p], &v, *t, seed)?;
        let path = layout.labels_file(p, *s, *t);
        ensure_parent(&path)?;
        series.write_csv(&path)
    });
    results.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub participant: String,
    pub subscale: String,
    pub interpolation: String,
    pub method: String,
    pub fitted: bool,
    pub reason: String,
    pub n_train: usize,
    pub n_test: usize,
    pub model_path: String,
    pub predictions_path: String,
}

#[derive(Serialize, Deserialize)]
struct PredictionRow {
    date: String,
    target: f64,
    prediction: f64,
}

fn write_predictions(path: &Path, run: &learning::ModelRun) -> Result<()> {
    ensure_parent(path)?;
    let mut w = writer(path)?;
    for ((d, y), p) in run.test_dates.iter().zip(&run.test_targets).zip(&run.predictions) {
        w.serialize(PredictionRow {
            date: d.format(DATE_FORMAT).to_string(),
            target: *y,
            prediction: *p,
        })
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_predictions(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = reader(path)?;
    let (mut y, mut yhat) = (Vec::new(), Vec::new());
    for row in rdr.deserialize::<PredictionRow>() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        y.push(row.target);
        yhat.push(row.prediction);
    }
    Ok((y, yhat))
}

fn path_string(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Fits the learning grid and writes models, predictions, traces and `runs.csv`.
pub fn stage_train(cfg: &RunConfig, filters: &Filters) -> Result<()> {
    let layout = Layout::new(&cfg.out_dir);
    let visits = ingest::read_visits(&ingest::cohort_paths(&layout.cohort_dir())[1])?;
    let seed = cfg.seed()?;
    let ids = participants_of(&visits);
    let frames = ids
        .iter()
        .map(|p| read_features(&layout, p).map(|f| (p.clone(), f)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let methods: Vec<LearningMethod> = cfg.methods.iter().copied().filter(|m| filters.method(*m)).collect();

    let mut groups: Vec<(SubscaleId, Technique)> = Vec::new();
    for &s in cfg.subscales.iter().filter(|s| filters.subscale(**s)) {
        for &t in cfg.techniques.iter().filter(|t| filters.technique(**t)) {
            groups.push((s, t));
        }
    }
    let split_sets = groups
        .iter()
        .map(|&(s, t)| -> Result<BTreeMap<ParticipantId, SplitDataset>> {
            let mut splits = BTreeMap::new();
            for p in &ids {
                let path = layout.labels_file(p, s, t);
                require(&path)?;
                let labels = PseudoLabelSeries::read_csv(&path, s, t)?;
                let data = preprocess::pivot_join(&frames[p], &labels)?;
                splits.insert(p.clone(), learning::split_chronological(&data)?);
            }
            Ok(splits)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut tasks = Vec::new();
    for (g, _) in groups.iter().enumerate() {
        for p in ids.iter().filter(|p| filters.participant(p)) {
            tasks.push((g, p.clone()));
        }
    }
    let outcomes = par::map(&tasks, |(g, p)| learning::run_cell(&split_sets[*g], p, &methods, &cfg.learning, seed));

    let mut rows = Vec::new();
    for outcome in outcomes {
        let cells = outcome?;
        for cell in cells {
            let mut row = RunRow {
                participant: cell.key.participant.to_string(),
                subscale: cell.key.subscale.to_string(),
                interpolation: cell.key.technique.to_string(),
                method: cell.key.method.to_string(),
                fitted: false,
                reason: String::new(),
                n_train: cell.n_train,
                n_test: cell.n_test,
                model_path: String::new(),
                predictions_path: String::new(),
            };
            match &cell.status {
                CellStatus::Fitted(run) => {
                    let model_rel = Layout::model_rel(&cell.key);
                    let pred_rel = Layout::predictions_rel(&cell.key);
                    let model_path = layout.root.join(&model_rel);
                    ensure_parent(&model_path)?;
                    run.model.save(&model_path)?;
                    write_predictions(&layout.root.join(&pred_rel), run)?;
                    row.fitted = true;
                    row.reason = learning::GateReason::Ok.name().into();
                    row.model_path = path_string(&model_rel);
                    row.predictions_path = path_string(&pred_rel);
                }
                CellStatus::Skipped(reason) => row.reason = reason.name().into(),
                CellStatus::Failed(msg) => row.reason = format!("failed: {msg}"),
            }
            if let Some(tuned) = &cell.tuning {
                let path = layout.tuning_file(&cell.key);
                ensure_parent(&path)?;
                tuning::write_trace(&path, &tuned.search, &tuned.screener, tuned.n_features_in)?;
            }
            rows.push(row);
        }
    }
    rows.sort_by(|a, b| {
        (&a.participant, &a.subscale, &a.interpolation, &a.method).cmp(&(&b.participant, &b.subscale, &b.interpolation, &b.method))
    });
    let path = layout.runs_file();
    let mut w = writer(&path)?;
    for row in &rows {
        w.serialize(row).map_err(|e| Error::csv(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

pub fn read_runs(path: &Path) -> Result<Vec<RunRow>> {
    let mut rdr = reader(path)?;
    rdr.deserialize::<RunRow>()
        .map(|r| r.map_err(|e| Error::csv(path, e)))
        .collect()
}

fn parse_key(row: &RunRow, path: &Path) -> Result<RunKey> {
    let bad = |e: Error| Error::parse(path, e.to_string());
    Ok(RunKey {
        participant: ParticipantId::new(row.participant.clone()),
        subscale: row.subscale.parse().map_err(bad)?,
        technique: row.interpolation.parse().map_err(bad)?,
        method: row.method.parse().map_err(bad)?,
    })
}

/// Scores every fitted run and writes `metrics.csv` plus the summary tables.
pub fn stage_evaluate(cfg: &RunConfig) -> Result<Vec<EvalRecord>> {
    let layout = Layout::new(&cfg.out_dir);
    let runs_path = layout.runs_file();
    let runs = read_runs(&runs_path)?;
    let mut records = Vec::new();
    for row in runs.iter().filter(|r| r.fitted) {
        let key = parse_key(row, &runs_path)?;
        let path = layout.root.join(&row.predictions_path);
        let (y, yhat) = read_predictions(&path)?;
        records.push(EvalRecord::from_predictions(key, &y, &yhat)?);
    }
    report::write_metrics(&layout.metrics_file(), &records)?;
    report::table4(&records).write_csv(&layout.table_file(4))?;
    report::table5(&records).write_csv(&layout.table_file(5))?;
    report::table6(&records).write_csv(&layout.table_file(6))?;
    report::table7(&records).write_csv(&layout.table_file(7))?;
    Ok(records)
}

/// Renders per-participant and cohort Taylor diagrams from `metrics.csv`.
pub fn stage_taylor(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let layout = Layout::new(&cfg.out_dir);
    let records = report::read_metrics(&layout.metrics_file())?;
    let dir = layout.taylor_dir();
    ensure_dir(&dir)?;
    let mut written = Vec::new();
    for panel in report::taylor_panels(&records) {
        if !(panel.sd_ref > 0.0) {
            log::warn!("skipping {}: reference SD is zero", panel.file_name());
            continue;
        }
        let title = format!("{} {}", panel.scope, panel.subscale);
        let svg = render_taylor(&panel.points, panel.sd_ref, &title)?;
        let path = dir.join(panel.file_name());
        std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// All stages in order, through the same files the staged commands use.
pub fn run_all(cfg: &RunConfig, filters: &Filters) -> Result<()> {
    cfg.validate()?;
    stage_synth(cfg)?;
    stage_preprocess(cfg)?;
    stage_interpolate(cfg, filters)?;
    stage_train(cfg, filters)?;
    stage_evaluate(cfg)?;
    stage_taylor(cfg)?;
    Ok(())
}

/// Loads a saved boosted-tree model by run key.
pub fn load_run_model(layout: &Layout, key: &RunKey) -> Result<GbtModel> {
    GbtModel::load(&layout.root.join(Layout::model_rel(key)))
}
