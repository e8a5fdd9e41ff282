//! Exact-greedy gradient-boosted regression trees for squared error.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LabeledDataset;
use crate::rng::PortableRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub eta: f64,
    pub n_estimators: usize,
    pub gamma: f64,
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub subsample: f64,
    pub colsample_bytree: f64,
    pub reg_lambda: f64,
    pub reg_alpha: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            eta: 0.3,
            n_estimators: 64,
            gamma: 0.0,
            max_depth: 6,
            min_child_weight: 1.0,
            subsample: 1.0,
            colsample_bytree: 1.0,
            reg_lambda: 1.0,
            reg_alpha: 0.0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |what: &str| Err(Error::Config(format!("invalid hyperparameter {what}")));
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return fail("eta");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return fail("subsample");
        }
        if !(self.colsample_bytree > 0.0 && self.colsample_bytree <= 1.0) {
            return fail("colsample_bytree");
        }
        if self.max_depth < 1 {
            return fail("max_depth");
        }
        if self.n_estimators < 1 {
            return fail("n_estimators");
        }
        if !(self.gamma >= 0.0) {
            return fail("gamma");
        }
        if !(self.reg_lambda >= 0.0) {
            return fail("reg_lambda");
        }
        if !(self.reg_alpha >= 0.0) {
            return fail("reg_alpha");
        }
        if !(self.min_child_weight >= 0.0) {
            return fail("min_child_weight");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        weight: f64,
    },
}

impl TreeNode {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { weight } => return *weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] < *threshold { left } else { right },
            }
        }
    }

    /// Depth of the deepest leaf; a lone leaf has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_splits(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.n_splits() + right.n_splits(),
        }
    }

    fn visit_splits(&self, f: &mut impl FnMut(usize)) {
        if let TreeNode::Split {
            feature, left, right, ..
        } = self
        {
            f(*feature);
            left.visit_splits(f);
            right.visit_splits(f);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub base_score: f64,
    pub hyper: HyperParams,
    pub feature_names: Vec<String>,
    pub trees: Vec<TreeNode>,
}

impl GbtModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut acc = self.base_score;
        for tree in &self.trees {
            acc += self.hyper.eta * tree.eval(x);
        }
        acc
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::parse(path, e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }
}

pub fn predict(model: &GbtModel, rows: &[&[f64]]) -> Result<Vec<f64>> {
    rows.iter()
        .map(|x| {
            if x.len() != model.n_features() {
                return Err(Error::Dimension {
                    expected: model.n_features(),
                    got: x.len(),
                });
            }
            Ok(model.predict_row(x))
        })
        .collect()
}

pub fn predict_dataset(model: &GbtModel, data: &LabeledDataset) -> Result<Vec<f64>> {
    predict(model, &data.features())
}

/// Column-major copy of the design matrix with per-column sort orders.
struct Columns {
    cols: Vec<Vec<f64>>,
    order: Vec<Vec<u32>>,
}

impl Columns {
    fn new(rows: &[&[f64]], n_features: usize) -> Self {
        let cols: Vec<Vec<f64>> = (0..n_features)
            .map(|f| rows.iter().map(|r| r[f]).collect())
            .collect();
        let order = cols
            .iter()
            .map(|c| {
                let mut idx: Vec<u32> = (0..c.len() as u32).collect();
                idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { cols, order }
    }
}

struct Grower<'a> {
    cols: &'a Columns,
    grad: &'a [f64],
    hyper: &'a HyperParams,
    /// Scratch: side of each row during a partition.
    goes_left: Vec<bool>,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Grower<'_> {
    fn leaf_weight(&self, g: f64, h: f64) -> f64 {
        let shrunk = (g.abs() - self.hyper.reg_alpha).max(0.0);
        if shrunk == 0.0 {
            return 0.0;
        }
        -g.signum() * shrunk / (h + self.hyper.reg_lambda)
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.hyper.reg_lambda)
    }

    /// `lists[k]` holds the node's rows sorted by the k-th active feature.
    fn grow(&mut self, features: &[usize], lists: Vec<Vec<u32>>, depth: usize) -> TreeNode {
        let rows = &lists[0];
        let g_total: f64 = rows.iter().map(|&i| self.grad[i as usize]).sum();
        let h_total = rows.len() as f64;
        let leaf = TreeNode::Leaf {
            weight: self.leaf_weight(g_total, h_total),
        };
        if depth >= self.hyper.max_depth || rows.len() < 2 {
            return leaf;
        }
        let mcw = self.hyper.min_child_weight;
        let parent = self.score(g_total, h_total);
        let mut best: Option<BestSplit> = None;
        for (k, &f) in features.iter().enumerate() {
            let col = &self.cols.cols[f];
            let list = &lists[k];
            let mut gl = 0.0;
            for pos in 0..list.len() - 1 {
                let i = list[pos] as usize;
                gl += self.grad[i];
                let a = col[i];
                let b = col[list[pos + 1] as usize];
                if !(a < b) {
                    continue;
                }
                let hl = (pos + 1) as f64;
                let hr = h_total - hl;
                if hl < mcw || hr < mcw {
                    continue;
                }
                let gr = g_total - gl;
                let gain = 0.5 * (self.score(gl, hl) + self.score(gr, hr) - parent) - self.hyper.gamma;
                if gain > best.as_ref().map_or(0.0, |s| s.gain) {
                    let mut threshold = 0.5 * (a + b);
                    if threshold <= a {
                        threshold = b;
                    }
                    best = Some(BestSplit {
                        gain,
                        feature: f,
                        threshold,
                    });
                }
            }
        }
        let Some(split) = best else {
            return leaf;
        };
        let col = &self.cols.cols[split.feature];
        for &i in rows {
            self.goes_left[i as usize] = col[i as usize] < split.threshold;
        }
        let mut left_lists = Vec::with_capacity(lists.len());
        let mut right_lists = Vec::with_capacity(lists.len());
        for list in &lists {
            let (l, r): (Vec<u32>, Vec<u32>) = list.iter().partition(|&&i| self.goes_left[i as usize]);
            left_lists.push(l);
            right_lists.push(r);
        }
        drop(lists);
        let left = self.grow(features, left_lists, depth + 1);
        let right = self.grow(features, right_lists, depth + 1);
        TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

fn sample_count(rate: f64, n: usize) -> usize {
    ((rate * n as f64).round() as usize).clamp(1, n)
}

/// Appends `rounds` trees fitted to the residuals of `preds`, updating `preds` in place.
fn boost(
    cols: &Columns,
    y: &[f64],
    preds: &mut [f64],
    hyper: &HyperParams,
    rounds: usize,
    seed: u64,
    trees: &mut Vec<TreeNode>,
) {
    let n = y.len();
    let n_features = cols.cols.len();
    let mut rng = PortableRng::new(seed);
    let mut grad = vec![0.0; n];
    let mut in_sample = vec![false; n];
    let mut grower_scratch = vec![false; n];
    for _ in 0..rounds {
        for i in 0..n {
            grad[i] = preds[i] - y[i];
        }
        let rows: Option<Vec<usize>> = (hyper.subsample < 1.0).then(|| rng.sample_indices(n, sample_count(hyper.subsample, n)));
        let features: Vec<usize> = if hyper.colsample_bytree < 1.0 {
            rng.sample_indices(n_features, sample_count(hyper.colsample_bytree, n_features))
        } else {
            (0..n_features).collect()
        };
        let lists: Vec<Vec<u32>> = match &rows {
            Some(rows) => {
                in_sample.iter_mut().for_each(|b| *b = false);
                rows.iter().for_each(|&i| in_sample[i] = true);
                features
                    .iter()
                    .map(|&f| cols.order[f].iter().copied().filter(|&i| in_sample[i as usize]).collect())
                    .collect()
            }
            None => features.iter().map(|&f| cols.order[f].clone()).collect(),
        };
        let mut grower = Grower {
            cols,
            grad: &grad,
            hyper,
            goes_left: std::mem::take(&mut grower_scratch),
        };
        let tree = grower.grow(&features, lists, 0);
        grower_scratch = grower.goes_left;
        let mut x = vec![0.0; n_features];
        for i in 0..n {
            for (f, v) in x.iter_mut().enumerate() {
                *v = cols.cols[f][i];
            }
            preds[i] += hyper.eta * tree.eval(&x);
        }
        trees.push(tree);
    }
}

fn check_training(rows: &[&[f64]], y: &[f64], n_features: usize) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("cannot fit on an empty dataset".into()));
    }
    if n_features == 0 {
        return Err(Error::InvalidInput("cannot fit without features".into()));
    }
    if rows.len() != y.len() {
        return Err(Error::Dimension {
            expected: rows.len(),
            got: y.len(),
        });
    }
    for r in rows {
        if r.len() != n_features {
            return Err(Error::Dimension {
                expected: n_features,
                got: r.len(),
            });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite feature value".into()));
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite target".into()));
    }
    Ok(())
}

pub fn fit_matrix(
    rows: &[&[f64]],
    y: &[f64],
    feature_names: Vec<String>,
    hyper: &HyperParams,
    seed: u64,
) -> Result<GbtModel> {
    hyper.validate()?;
    check_training(rows, y, feature_names.len())?;
    let base_score = y.iter().sum::<f64>() / y.len() as f64;
    let cols = Columns::new(rows, feature_names.len());
    let mut preds = vec![base_score; y.len()];
    let mut trees = Vec::with_capacity(hyper.n_estimators);
    boost(&cols, y, &mut preds, hyper, hyper.n_estimators, seed, &mut trees);
    Ok(GbtModel {
        base_score,
        hyper: *hyper,
        feature_names,
        trees,
    })
}

pub fn fit(train: &LabeledDataset, hyper: &HyperParams, seed: u64) -> Result<GbtModel> {
    fit_matrix(&train.features(), &train.targets(), train.feature_names.clone(), hyper, seed)
}

/// Returns a new model with `extra_trees` more trees fitted to the residuals
/// of `model` on `data`. `data` is projected onto the model's features.
pub fn continue_fit(model: &GbtModel, data: &LabeledDataset, extra_trees: usize, seed: u64) -> Result<GbtModel> {
    let data = if data.feature_names == model.feature_names {
        std::borrow::Cow::Borrowed(data)
    } else {
        std::borrow::Cow::Owned(data.project(&model.feature_names)?)
    };
    let rows = data.features();
    let y = data.targets();
    check_training(&rows, &y, model.n_features())?;
    let mut out = model.clone();
    if extra_trees == 0 {
        return Ok(out);
    }
    let mut preds: Vec<f64> = rows.iter().map(|x| model.predict_row(x)).collect();
    let cols = Columns::new(&rows, model.n_features());
    boost(&cols, &y, &mut preds, &model.hyper, extra_trees, seed, &mut out.trees);
    Ok(out)
}

/// Split count per feature name; unused features are absent.
pub fn importance_weight(model: &GbtModel) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for tree in &model.trees {
        tree.visit_splits(&mut |f| *counts.entry(model.feature_names[f].clone()).or_insert(0) += 1);
    }
    counts
}
