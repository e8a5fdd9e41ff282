//! Randomized hyperparameter search and precision-rounding feature screening.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::rmse;
use crate::gbtree::{self, GbtModel, HyperParams};
use crate::ingest::writer;
use crate::model::SplitDataset;
use crate::par;
use crate::rng::{derive_seed, PortableRng};

pub const MAX_SELECTED_FEATURES: usize = 200;
pub const PRECISION_LEVELS: std::ops::RangeInclusive<u32> = 1..=6;
pub const DEFAULT_N_ITER: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    pub eta: Vec<f64>,
    pub n_estimators: Vec<usize>,
    pub gamma: Vec<f64>,
    pub max_depth: Vec<usize>,
    pub min_child_weight: Vec<f64>,
    pub subsample: Vec<f64>,
    pub colsample_bytree: Vec<f64>,
    pub reg_lambda: Vec<f64>,
    pub reg_alpha: Vec<f64>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            eta: vec![0.001, 0.01, 0.1, 0.3, 0.5],
            n_estimators: vec![32, 64, 128, 192, 256, 384, 512],
            gamma: vec![0.0, 0.25, 0.5, 1.0],
            max_depth: vec![2, 3, 4, 6, 8, 10, 12, 16, 24],
            min_child_weight: vec![0.5, 1.0, 3.0, 5.0, 7.0, 10.0],
            subsample: vec![0.8, 0.9, 1.0],
            colsample_bytree: vec![0.6, 0.7, 0.8, 0.9],
            reg_lambda: vec![0.01, 0.1, 1.0, 5.0, 10.0, 50.0, 100.0],
            reg_alpha: vec![0.0, 0.001, 0.01, 0.1],
        }
    }
}

fn pick<T: Copy>(rng: &mut PortableRng, values: &[T]) -> T {
    values[rng.below(values.len())]
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let lens = [
            ("eta", self.eta.len()),
            ("n_estimators", self.n_estimators.len()),
            ("gamma", self.gamma.len()),
            ("max_depth", self.max_depth.len()),
            ("min_child_weight", self.min_child_weight.len()),
            ("subsample", self.subsample.len()),
            ("colsample_bytree", self.colsample_bytree.len()),
            ("reg_lambda", self.reg_lambda.len()),
            ("reg_alpha", self.reg_alpha.len()),
        ];
        if let Some((name, _)) = lens.iter().find(|(_, n)| *n == 0) {
            return Err(Error::Config(format!("search space list {name} is empty")));
        }
        Ok(())
    }

    /// One uniform draw per field, in declaration order.
    pub fn draw(&self, rng: &mut PortableRng) -> HyperParams {
        HyperParams {
            eta: pick(rng, &self.eta),
            n_estimators: pick(rng, &self.n_estimators),
            gamma: pick(rng, &self.gamma),
            max_depth: pick(rng, &self.max_depth),
            min_child_weight: pick(rng, &self.min_child_weight),
            subsample: pick(rng, &self.subsample),
            colsample_bytree: pick(rng, &self.colsample_bytree),
            reg_lambda: pick(rng, &self.reg_lambda),
            reg_alpha: pick(rng, &self.reg_alpha),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchTrial {
    pub hyper: HyperParams,
    pub test_rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub best: HyperParams,
    pub best_index: usize,
    pub trials: Vec<SearchTrial>,
}

fn test_rmse(model: &GbtModel, split: &SplitDataset) -> Result<f64> {
    let preds = gbtree::predict_dataset(model, &split.test)?;
    rmse(&split.test.targets(), &preds)
}

/// Draws `n_iter` configurations, scores each on the test split and keeps
/// the first one with the lowest RMSE.
pub fn random_search_trace(split: &SplitDataset, space: &SearchSpace, n_iter: usize, seed: u64) -> Result<SearchOutcome> {
    if n_iter < 1 {
        return Err(Error::Config("random search needs n_iter >= 1".into()));
    }
    space.validate()?;
    let mut rng = PortableRng::substream(seed, "draws");
    let draws: Vec<(usize, HyperParams)> = (0..n_iter).map(|i| (i, space.draw(&mut rng))).collect();
    let scored = par::map(&draws, |(i, hyper)| {
        let model = gbtree::fit(&split.train, hyper, derive_seed(seed, &format!("candidate|{i}")))?;
        test_rmse(&model, split)
    });
    let mut trials = Vec::with_capacity(n_iter);
    for ((_, hyper), score) in draws.into_iter().zip(scored) {
        trials.push(SearchTrial {
            hyper,
            test_rmse: score?,
        });
    }
    let mut best_index = 0;
    for (i, t) in trials.iter().enumerate() {
        if t.test_rmse < trials[best_index].test_rmse {
            best_index = i;
        }
    }
    Ok(SearchOutcome {
        best: trials[best_index].hyper,
        best_index,
        trials,
    })
}

pub fn random_search(split: &SplitDataset, space: &SearchSpace, n_iter: usize, seed: u64) -> Result<HyperParams> {
    random_search_trace(split, space, n_iter, seed).map(|o| o.best)
}

/// Split counts scaled to sum to 1; empty when there are no splits.
pub fn normalized_importance(model: &GbtModel) -> BTreeMap<String, f64> {
    let counts = gbtree::importance_weight(model);
    let total: usize = counts.values().sum();
    if total == 0 {
        return BTreeMap::new();
    }
    counts
        .into_iter()
        .map(|(k, c)| (k, c as f64 / total as f64))
        .collect()
}

fn survives(importance: f64, precision: u32) -> bool {
    (importance * 10f64.powi(precision as i32)).round() > 0.0
}

/// Features whose importance rounded to `precision` decimals is positive,
/// ranked by importance then name, before any cap.
pub fn precision_candidates(importance: &BTreeMap<String, f64>, precision: u32) -> Vec<String> {
    let mut ranked: Vec<(&String, f64)> = importance
        .iter()
        .filter(|(_, &v)| survives(v, precision))
        .map(|(k, &v)| (k, v))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.into_iter().map(|(k, _)| k.clone()).collect()
}

pub fn select_by_precision(importance: &BTreeMap<String, f64>, precision: u32, cap: usize) -> Vec<String> {
    let mut v = precision_candidates(importance, precision);
    v.truncate(cap);
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenerIteration {
    /// `None` marks the full-feature baseline.
    pub precision_level: Option<u32>,
    pub feature_count: usize,
    pub test_rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenerResult {
    pub best_hyper: HyperParams,
    pub selected_features: Vec<String>,
    pub best_model: GbtModel,
    pub iterations: Vec<ScreenerIteration>,
    pub best_iteration: usize,
    /// Set when the full model made no splits and the baseline was kept.
    pub zero_importance: bool,
}

impl ScreenerResult {
    pub fn best_rmse(&self) -> f64 {
        self.iterations[self.best_iteration].test_rmse
    }
}

pub fn screener_learner(split: &SplitDataset, hyper: &HyperParams, seed: u64) -> Result<ScreenerResult> {
    if split.train.is_empty() {
        return Err(Error::InvalidInput("screener needs training rows".into()));
    }
    let fit_seed = derive_seed(seed, "screener");
    let full = gbtree::fit(&split.train, hyper, fit_seed)?;
    let full_rmse = test_rmse(&full, split)?;
    let baseline = ScreenerIteration {
        precision_level: None,
        feature_count: split.train.n_features(),
        test_rmse: full_rmse,
    };
    let importance = normalized_importance(&full);
    if importance.is_empty() {
        log::warn!("no splits in full-feature model; keeping all features");
        return Ok(ScreenerResult {
            best_hyper: *hyper,
            selected_features: split.train.feature_names.clone(),
            best_model: full,
            iterations: vec![baseline],
            best_iteration: 0,
            zero_importance: true,
        });
    }

    let column_order: BTreeMap<&str, usize> = split
        .train
        .feature_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let mut levels: Vec<(u32, Vec<String>)> = Vec::new();
    for d in PRECISION_LEVELS {
        let mut set = select_by_precision(&importance, d, MAX_SELECTED_FEATURES);
        if set.is_empty() {
            continue;
        }
        set.sort_by_key(|n| column_order[n.as_str()]);
        levels.push((d, set));
    }
    let mut distinct: Vec<Vec<String>> = Vec::new();
    for (_, set) in &levels {
        if !distinct.contains(set) && *set != split.train.feature_names {
            distinct.push(set.clone());
        }
    }
    let fitted = par::map(&distinct, |set| -> Result<(GbtModel, f64)> {
        let sub = SplitDataset {
            train: split.train.project(set)?,
            test: split.test.project(set)?,
        };
        let model = gbtree::fit(&sub.train, hyper, fit_seed)?;
        let score = test_rmse(&model, &sub)?;
        Ok((model, score))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut iterations = vec![baseline];
    let mut models: Vec<Option<usize>> = vec![None];
    for (d, set) in &levels {
        let idx = distinct.iter().position(|s| s == set);
        let score = idx.map_or(full_rmse, |i| fitted[i].1);
        iterations.push(ScreenerIteration {
            precision_level: Some(*d),
            feature_count: set.len(),
            test_rmse: score,
        });
        models.push(idx);
    }
    let rank = |it: &ScreenerIteration| (it.test_rmse, it.feature_count, it.precision_level.unwrap_or(u32::MAX));
    let mut best = 0;
    for i in 1..iterations.len() {
        let (a, b) = (rank(&iterations[i]), rank(&iterations[best]));
        if a.0 < b.0 || (a.0 == b.0 && (a.1, a.2) < (b.1, b.2)) {
            best = i;
        }
    }
    let (best_model, selected_features) = match models[best] {
        Some(i) => (fitted[i].0.clone(), distinct[i].clone()),
        None => (full, split.train.feature_names.clone()),
    };
    Ok(ScreenerResult {
        best_hyper: *hyper,
        selected_features,
        best_model,
        iterations,
        best_iteration: best,
        zero_importance: false,
    })
}

#[derive(Serialize)]
struct TraceRow {
    phase: &'static str,
    iteration: usize,
    precision_level: String,
    feature_count: usize,
    test_rmse: f64,
    hyper_json: String,
}

pub fn write_trace(path: &Path, search: &SearchOutcome, screener: &ScreenerResult, n_features: usize) -> Result<()> {
    let mut w = writer(path)?;
    let hyper_json = |h: &HyperParams| serde_json::to_string(h).unwrap_or_default();
    let mut rows = Vec::new();
    for (i, t) in search.trials.iter().enumerate() {
        rows.push(TraceRow {
            phase: "search",
            iteration: i,
            precision_level: String::new(),
            feature_count: n_features,
            test_rmse: t.test_rmse,
            hyper_json: hyper_json(&t.hyper),
        });
    }
    for (i, it) in screener.iterations.iter().enumerate() {
        rows.push(TraceRow {
            phase: "screen",
            iteration: i,
            precision_level: it.precision_level.map(|d| d.to_string()).unwrap_or_else(|| "full".into()),
            feature_count: it.feature_count,
            test_rmse: it.test_rmse,
            hyper_json: hyper_json(&screener.best_hyper),
        });
    }
    for row in rows {
        w.serialize(row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
