//! Chronological splits, variance gating and the three learning paradigms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::report::{EvalRecord, RunKey};
use crate::gbtree::{self, GbtModel};
use crate::model::{LabeledDataset, LabeledRow, ParticipantId, SplitDataset, SubscaleId, Technique};
use crate::rng::{derive_seed, PortableRng};
use crate::tuning::{self, ScreenerResult, SearchOutcome, SearchSpace};

pub const LOW_VARIANCE_EPSILON: f64 = 0.01;
pub const MIN_SPLIT_ROWS: usize = 10;
pub const TEST_FRACTION: f64 = 0.2;
pub const DEFAULT_FINE_TUNE_BUDGET: usize = 128;
pub const DEFAULT_CHUNK_DAYS: i64 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LearningMethod {
    IndividualBatch,
    TransferBatch,
    TransferIncremental,
}

impl LearningMethod {
    pub const ALL: [LearningMethod; 3] = [
        LearningMethod::IndividualBatch,
        LearningMethod::TransferBatch,
        LearningMethod::TransferIncremental,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LearningMethod::IndividualBatch => "IndividualBatch",
            LearningMethod::TransferBatch => "TransferBatch",
            LearningMethod::TransferIncremental => "TransferIncremental",
        }
    }

    pub fn is_transfer(self) -> bool {
        self != LearningMethod::IndividualBatch
    }
}

impl fmt::Display for LearningMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LearningMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LearningMethod::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown learning method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FineTuneMode {
    Batch,
    Incremental,
}

impl FineTuneMode {
    pub fn method(self) -> LearningMethod {
        match self {
            FineTuneMode::Batch => LearningMethod::TransferBatch,
            FineTuneMode::Incremental => LearningMethod::TransferIncremental,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateReason {
    Ok,
    LowTrainVariance,
    ZeroVarianceStatic,
}

impl GateReason {
    pub fn name(self) -> &'static str {
        match self {
            GateReason::Ok => "ok",
            GateReason::LowTrainVariance => "low_train_variance",
            GateReason::ZeroVarianceStatic => "zero_variance_static",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateDecision {
    pub subscale: SubscaleId,
    pub method: LearningMethod,
    pub fitted: bool,
    pub reason: GateReason,
}

/// Test rows = last `ceil(0.2 n)`.
pub fn split_sizes(n: usize) -> Result<(usize, usize)> {
    if n < MIN_SPLIT_ROWS {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_SPLIT_ROWS} rows to split, got {n}"
        )));
    }
    let n_test = (TEST_FRACTION * n as f64).ceil() as usize;
    Ok((n - n_test, n_test))
}

fn split_rows(dataset: &LabeledDataset) -> Result<SplitDataset> {
    let (n_train, _) = split_sizes(dataset.len())?;
    Ok(SplitDataset {
        train: dataset.with_rows(dataset.rows[..n_train].to_vec()),
        test: dataset.with_rows(dataset.rows[n_train..].to_vec()),
    })
}

pub fn split_chronological(dataset: &LabeledDataset) -> Result<SplitDataset> {
    if !dataset.is_chronological() {
        return Err(Error::InvalidInput("dataset rows are not in date order".into()));
    }
    split_rows(dataset)
}

pub fn sample_variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (v.len() - 1) as f64
}

pub fn gate_on_variance(subscale: SubscaleId, variance: f64, method: LearningMethod) -> GateDecision {
    let reason = match method {
        LearningMethod::IndividualBatch if variance < LOW_VARIANCE_EPSILON => GateReason::LowTrainVariance,
        m if m.is_transfer() && variance == 0.0 => GateReason::ZeroVarianceStatic,
        _ => GateReason::Ok,
    };
    GateDecision {
        subscale,
        method,
        fitted: reason == GateReason::Ok,
        reason,
    }
}

pub fn variance_gate(subscale: SubscaleId, train_targets: &[f64], method: LearningMethod) -> GateDecision {
    gate_on_variance(subscale, sample_variance(train_targets), method)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningConfig {
    pub space: SearchSpace,
    pub n_iter: usize,
    pub fine_tune_budget: usize,
    pub chunk_days: i64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            space: SearchSpace::default(),
            n_iter: tuning::DEFAULT_N_ITER,
            fine_tune_budget: DEFAULT_FINE_TUNE_BUDGET,
            chunk_days: DEFAULT_CHUNK_DAYS,
        }
    }
}

impl LearningConfig {
    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        if self.n_iter < 1 {
            return Err(Error::Config("n_iter must be at least 1".into()));
        }
        if self.chunk_days < 1 {
            return Err(Error::Config("chunk_days must be at least 1".into()));
        }
        Ok(())
    }
}

/// Tuned and screened model plus its search history.
#[derive(Debug, Clone, PartialEq)]
pub struct TunedModel {
    pub model: GbtModel,
    pub search: SearchOutcome,
    pub screener: ScreenerResult,
    pub n_features_in: usize,
}

pub fn tune_and_fit(split: &SplitDataset, cfg: &LearningConfig, seed: u64) -> Result<TunedModel> {
    let search = tuning::random_search_trace(split, &cfg.space, cfg.n_iter, derive_seed(seed, "search"))?;
    let screener = tuning::screener_learner(split, &search.best, derive_seed(seed, "screen"))?;
    Ok(TunedModel {
        model: screener.best_model.clone(),
        search,
        screener,
        n_features_in: split.train.n_features(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRun {
    pub key: RunKey,
    pub model: GbtModel,
    pub n_train: usize,
    pub test_dates: Vec<NaiveDate>,
    pub test_targets: Vec<f64>,
    pub predictions: Vec<f64>,
}

impl ModelRun {
    fn evaluate(key: RunKey, model: GbtModel, n_train: usize, test: &LabeledDataset) -> Result<Self> {
        let test = if test.feature_names == model.feature_names {
            test.clone()
        } else {
            test.project(&model.feature_names)?
        };
        let predictions = gbtree::predict_dataset(&model, &test)?;
        Ok(Self {
            key,
            model,
            n_train,
            test_dates: test.rows.iter().map(|r| r.date).collect(),
            test_targets: test.targets(),
            predictions,
        })
    }

    pub fn record(&self) -> Result<EvalRecord> {
        EvalRecord::from_predictions(self.key.clone(), &self.test_targets, &self.predictions)
    }
}

fn key_for(split: &SplitDataset, participant: &ParticipantId, method: LearningMethod) -> RunKey {
    RunKey {
        participant: participant.clone(),
        subscale: split.train.subscale,
        technique: split.train.technique,
        method,
    }
}

pub fn fit_individual_batch(
    participant: &ParticipantId,
    split: &SplitDataset,
    cfg: &LearningConfig,
    seed: u64,
) -> Result<(ModelRun, TunedModel)> {
    let tuned = tune_and_fit(split, cfg, seed)?;
    let key = key_for(split, participant, LearningMethod::IndividualBatch);
    let run = ModelRun::evaluate(key, tuned.model.clone(), split.train.len(), &split.test)?;
    Ok((run, tuned))
}

/// Leave-one-out cohort model for `target`, shared by both fine-tuning modes.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortModel {
    pub target: ParticipantId,
    pub sources: Vec<ParticipantId>,
    pub feature_names: Vec<String>,
    pub pool_rows: usize,
    pub tuned: TunedModel,
}

pub fn shared_features(splits: &BTreeMap<ParticipantId, SplitDataset>) -> Vec<String> {
    let mut iter = splits.values();
    let Some(first) = iter.next() else {
        return Vec::new();
    };
    let mut common: BTreeSet<&String> = first.train.feature_names.iter().collect();
    for s in iter {
        let names: BTreeSet<&String> = s.train.feature_names.iter().collect();
        common = common.intersection(&names).copied().collect();
    }
    common.into_iter().cloned().collect()
}

pub fn fit_cohort_model(
    splits: &BTreeMap<ParticipantId, SplitDataset>,
    target: &ParticipantId,
    cfg: &LearningConfig,
    seed: u64,
) -> Result<CohortModel> {
    let sources: Vec<ParticipantId> = splits.keys().filter(|p| *p != target).cloned().collect();
    if sources.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "transfer learning for {target} needs at least 2 source participants, got {}",
            sources.len()
        )));
    }
    let features = shared_features(splits);
    if features.is_empty() {
        return Err(Error::InvalidInput("participants share no features".into()));
    }
    let template = &splits[&sources[0]].train;
    let mut pool: Vec<LabeledRow> = Vec::new();
    for p in &sources {
        pool.extend(splits[p].train.project(&features)?.rows);
    }
    let mut rng = PortableRng::substream(seed, "pool");
    rng.shuffle(&mut pool);
    let pooled = LabeledDataset::new(features.clone(), template.subscale, template.technique, pool)?;
    let pool_split = split_rows(&pooled)?;
    let tuned = tune_and_fit(&pool_split, cfg, seed)?;
    Ok(CohortModel {
        target: target.clone(),
        sources,
        feature_names: features,
        pool_rows: pooled.len(),
        tuned,
    })
}

/// Consecutive `chunk_days` windows from the first training date; empty windows are dropped.
pub fn chunk_by_days(data: &LabeledDataset, chunk_days: i64) -> Vec<LabeledDataset> {
    let Some(first) = data.rows.first().map(|r| r.date) else {
        return Vec::new();
    };
    let mut chunks: BTreeMap<i64, Vec<LabeledRow>> = BTreeMap::new();
    for row in &data.rows {
        chunks
            .entry((row.date - first).num_days().div_euclid(chunk_days))
            .or_default()
            .push(row.clone());
    }
    chunks.into_values().map(|rows| data.with_rows(rows)).collect()
}

pub fn fine_tune(
    cohort: &CohortModel,
    split: &SplitDataset,
    mode: FineTuneMode,
    cfg: &LearningConfig,
    seed: u64,
) -> Result<ModelRun> {
    let base = &cohort.tuned.model;
    let train = split.train.project(&base.feature_names)?;
    let model = match mode {
        FineTuneMode::Batch => gbtree::continue_fit(base, &train, cfg.fine_tune_budget, derive_seed(seed, "fine-tune"))?,
        FineTuneMode::Incremental => {
            let chunks = chunk_by_days(&train, cfg.chunk_days);
            let per_chunk = cfg.fine_tune_budget.div_ceil(chunks.len().max(1));
            let mut model = base.clone();
            for (j, chunk) in chunks.iter().enumerate() {
                model = gbtree::continue_fit(&model, chunk, per_chunk, derive_seed(seed, &format!("chunk|{j}")))?;
            }
            model
        }
    };
    let key = key_for(split, &cohort.target, mode.method());
    ModelRun::evaluate(key, model, split.train.len(), &split.test)
}

pub fn fit_transfer(
    splits: &BTreeMap<ParticipantId, SplitDataset>,
    target: &ParticipantId,
    mode: FineTuneMode,
    cfg: &LearningConfig,
    seed: u64,
) -> Result<ModelRun> {
    let split = splits
        .get(target)
        .ok_or_else(|| Error::InvalidInput(format!("no data for target {target}")))?;
    let cohort = fit_cohort_model(splits, target, cfg, seed)?;
    fine_tune(&cohort, split, mode, cfg, seed)
}

pub fn run_seed(master: u64, participant: &ParticipantId, subscale: SubscaleId, technique: Technique, label: &str) -> u64 {
    derive_seed(master, &format!("{participant}|{subscale}|{technique}|{label}"))
}

/// Outcome of one grid cell for one method.
#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Fitted(Box<ModelRun>),
    Skipped(GateReason),
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub key: RunKey,
    pub n_train: usize,
    pub n_test: usize,
    pub status: CellStatus,
    /// Search and screening history of the model fitted for this cell, if any.
    pub tuning: Option<TunedModel>,
}

/// Runs every requested method for one (participant, subscale, technique).
///
/// `splits` holds every participant's split for this subscale and
/// technique; the cohort model is built once and shared by both
/// transfer modes.
pub fn run_cell(
    splits: &BTreeMap<ParticipantId, SplitDataset>,
    target: &ParticipantId,
    methods: &[LearningMethod],
    cfg: &LearningConfig,
    master_seed: u64,
) -> Result<Vec<CellOutcome>> {
    let split = splits
        .get(target)
        .ok_or_else(|| Error::InvalidInput(format!("no data for target {target}")))?;
    let subscale = split.train.subscale;
    let technique = split.train.technique;
    let targets = split.train.targets();
    let mut cohort: Option<std::result::Result<CohortModel, String>> = None;
    let mut out = Vec::new();
    for &method in methods {
        let key = key_for(split, target, method);
        let gate = variance_gate(subscale, &targets, method);
        let mut tuning_info = None;
        let status = if !gate.fitted {
            CellStatus::Skipped(gate.reason)
        } else if method == LearningMethod::IndividualBatch {
            let seed = run_seed(master_seed, target, subscale, technique, method.name());
            match fit_individual_batch(target, split, cfg, seed) {
                Ok((run, tuned)) => {
                    tuning_info = Some(tuned);
                    CellStatus::Fitted(Box::new(run))
                }
                Err(e) => CellStatus::Failed(e.to_string()),
            }
        } else {
            let cohort = cohort.get_or_insert_with(|| {
                let seed = run_seed(master_seed, target, subscale, technique, "cohort");
                fit_cohort_model(splits, target, cfg, seed).map_err(|e| e.to_string())
            });
            match cohort {
                Ok(c) => {
                    let mode = if method == LearningMethod::TransferBatch {
                        FineTuneMode::Batch
                    } else {
                        FineTuneMode::Incremental
                    };
                    let seed = run_seed(master_seed, target, subscale, technique, method.name());
                    tuning_info = Some(c.tuned.clone());
                    match fine_tune(c, split, mode, cfg, seed) {
                        Ok(run) => CellStatus::Fitted(Box::new(run)),
                        Err(e) => CellStatus::Failed(e.to_string()),
                    }
                }
                Err(msg) => CellStatus::Failed(msg.clone()),
            }
        };
        if let CellStatus::Failed(msg) = &status {
            log::warn!("{target} {subscale} {technique} {method} failed: {msg}");
        }
        out.push(CellOutcome {
            key,
            n_train: split.train.len(),
            n_test: split.test.len(),
            status,
            tuning: tuning_info,
        });
    }
    Ok(out)
}
