//! Shallow self-attention regressor used as a pseudo-label interpolator.
//!
//! Architecture (pre-norm, one encoder block):
//!
//! ```text
//! e   = x We + be + pe(day)            input projection + sinusoidal position
//! h   = e + MHA(LN1(e))                queries at the requested days, keys/values over the whole table
//! z   = h + W2 relu(W1 LN2(h) + b1) + b2
//! y   = z wh + bh                      scalar head, in units of the subscale maximum
//! ```
//!
//! Training is full-batch gradient descent on the mean squared error at the
//! visit dates only; gradients are derived by hand below.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::PseudoLabelSeries;
use crate::error::{Error, Result};
use crate::model::{SubscaleId, Technique, VisitScore};
use crate::preprocess::FeatureFrame;
use crate::rng::PortableRng;

const LN_EPS: f64 = 1e-5;
const PE_BASE: f64 = 10_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttentionHyper {
    pub d_model: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for AttentionHyper {
    fn default() -> Self {
        Self {
            d_model: 32,
            heads: 2,
            ff_dim: 64,
            epochs: 2000,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

impl AttentionHyper {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.heads == 0 || self.d_model % self.heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} must be a positive multiple of heads {}",
                self.d_model, self.heads
            )));
        }
        if self.ff_dim == 0 || !(self.learning_rate > 0.0) {
            return Err(Error::Config("ff_dim and learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Parameter tensors in persistence order.
pub const PARAM_NAMES: [&str; 20] = [
    "embed.weight",
    "embed.bias",
    "ln1.gamma",
    "ln1.beta",
    "attn.query.weight",
    "attn.query.bias",
    "attn.key.weight",
    "attn.key.bias",
    "attn.value.weight",
    "attn.value.bias",
    "attn.output.weight",
    "attn.output.bias",
    "ln2.gamma",
    "ln2.beta",
    "ff.hidden.weight",
    "ff.hidden.bias",
    "ff.output.weight",
    "ff.output.bias",
    "head.weight",
    "head.bias",
];

const EMBED_W: usize = 0;
const EMBED_B: usize = 1;
const LN1_G: usize = 2;
const LN1_B: usize = 3;
const WQ: usize = 4;
const BQ: usize = 5;
const WK: usize = 6;
const BK: usize = 7;
const WV: usize = 8;
const BV: usize = 9;
const WO: usize = 10;
const BO: usize = 11;
const LN2_G: usize = 12;
const LN2_B: usize = 13;
const W1: usize = 14;
const B1: usize = 15;
const W2: usize = 16;
const B2: usize = 17;
const WH: usize = 18;
const BH: usize = 19;

/// All parameters; biases and norm vectors are stored as `1 x n` rows and the
/// head weight as `d_model x 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub tensors: Vec<Array2<f64>>,
}

impl Params {
    fn shapes(d_in: usize, d: usize, ff: usize) -> [(usize, usize); 20] {
        [
            (d_in, d),
            (1, d),
            (1, d),
            (1, d),
            (d, d),
            (1, d),
            (d, d),
            (1, d),
            (d, d),
            (1, d),
            (d, d),
            (1, d),
            (1, d),
            (1, d),
            (d, ff),
            (1, ff),
            (ff, d),
            (1, d),
            (d, 1),
            (1, 1),
        ]
    }

    /// Scaled-uniform weights, zero biases, unit gammas, head bias `head_bias`.
    pub fn init(d_in: usize, hyper: &AttentionHyper, head_bias: f64) -> Self {
        let mut rng = PortableRng::substream(hyper.seed, "attention-init");
        let tensors = Self::shapes(d_in, hyper.d_model, hyper.ff_dim)
            .iter()
            .enumerate()
            .map(|(idx, &(r, c))| match idx {
                LN1_G | LN2_G => Array2::ones((r, c)),
                BH => Array2::from_elem((1, 1), head_bias),
                EMBED_W | WQ | WK | WV | WO | W1 | W2 | WH => {
                    let a = (6.0 / (r + c) as f64).sqrt();
                    Array2::from_shape_fn((r, c), |_| rng.uniform(-a, a))
                }
                _ => Array2::zeros((r, c)),
            })
            .collect();
        Self { tensors }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            tensors: self.tensors.iter().map(|t| Array2::zeros(t.raw_dim())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn n_values(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }
}

fn positional_encoding(days: &[f64], d: usize) -> Array2<f64> {
    Array2::from_shape_fn((days.len(), d), |(t, j)| {
        let pair = (j / 2) as f64;
        let angle = days[t] / PE_BASE.powf(2.0 * pair / d as f64);
        if j % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

struct LayerNormCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

fn layer_norm(x: &Array2<f64>, gamma: &Array2<f64>, beta: &Array2<f64>) -> (Array2<f64>, LayerNormCache) {
    let d = x.ncols() as f64;
    let mean = x.sum_axis(Axis(1)) / d;
    let centered = x - &mean.view().insert_axis(Axis(1));
    let var = centered.mapv(|v| v * v).sum_axis(Axis(1)) / d;
    let inv_std = var.mapv(|v| 1.0 / (v + LN_EPS).sqrt());
    let xhat = &centered * &inv_std.view().insert_axis(Axis(1));
    let y = &xhat * gamma + beta;
    (y, LayerNormCache { xhat, inv_std })
}

/// Returns `dx` and accumulates `dgamma`, `dbeta`.
fn layer_norm_backward(
    dy: &Array2<f64>,
    gamma: &Array2<f64>,
    cache: &LayerNormCache,
    dgamma: &mut Array2<f64>,
    dbeta: &mut Array2<f64>,
) -> Array2<f64> {
    let d = dy.ncols() as f64;
    *dgamma += &(dy * &cache.xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
    *dbeta += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    let dxhat = dy * gamma;
    let sum_dxhat = dxhat.sum_axis(Axis(1)).insert_axis(Axis(1));
    let sum_dxhat_xhat = (&dxhat * &cache.xhat).sum_axis(Axis(1)).insert_axis(Axis(1));
    let inner = &dxhat * d - &sum_dxhat - &(&cache.xhat * &sum_dxhat_xhat);
    inner * &(cache.inv_std.view().insert_axis(Axis(1)).mapv(|s| s / d))
}

fn softmax_rows(s: &mut Array2<f64>) {
    for mut row in s.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

fn rows(x: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    x.select(Axis(0), idx)
}

struct ForwardCache {
    ln1: LayerNormCache,
    n1: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    attn: Vec<Array2<f64>>,
    o: Array2<f64>,
    ln2: LayerNormCache,
    n2: Array2<f64>,
    pre: Array2<f64>,
    act: Array2<f64>,
    z: Array2<f64>,
}

/// Forward pass over the full table `x` (T x d_in) with outputs at `queries`.
fn forward(
    params: &Params,
    heads: usize,
    x: ArrayView2<f64>,
    pe: &Array2<f64>,
    queries: &[usize],
) -> (Array1<f64>, ForwardCache) {
    let p = &params.tensors;
    let d = p[EMBED_W].ncols();
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();

    let e = x.dot(&p[EMBED_W]) + &p[EMBED_B] + pe;
    let (n1, ln1) = layer_norm(&e, &p[LN1_G], &p[LN1_B]);
    let q = rows(&n1, queries).dot(&p[WQ]) + &p[BQ];
    let k = n1.dot(&p[WK]) + &p[BK];
    let v = n1.dot(&p[WV]) + &p[BV];

    let mut o = Array2::zeros((queries.len(), d));
    let mut attn = Vec::with_capacity(heads);
    for hd in 0..heads {
        let cols = s![.., hd * dh..(hd + 1) * dh];
        let mut scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
        softmax_rows(&mut scores);
        o.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
        attn.push(scores);
    }
    let h = rows(&e, queries) + &(o.dot(&p[WO]) + &p[BO]);
    let (n2, ln2) = layer_norm(&h, &p[LN2_G], &p[LN2_B]);
    let pre = n2.dot(&p[W1]) + &p[B1];
    let act = pre.mapv(|v| v.max(0.0));
    let z = &h + &(act.dot(&p[W2]) + &p[B2]);
    let y = z.dot(&p[WH]).column(0).to_owned() + p[BH][[0, 0]];
    (
        y,
        ForwardCache {
            ln1,
            n1,
            q,
            k,
            v,
            attn,
            o,
            ln2,
            n2,
            pre,
            act,
            z,
        },
    )
}

/// Mean squared error at `queries` against `targets` and its gradient.
fn loss_and_grad(
    params: &Params,
    heads: usize,
    x: ArrayView2<f64>,
    pe: &Array2<f64>,
    queries: &[usize],
    targets: &[f64],
) -> (f64, Params) {
    let p = &params.tensors;
    let (y, c) = forward(params, heads, x, pe, queries);
    let m = queries.len() as f64;
    let resid: Array1<f64> = &y - &Array1::from_vec(targets.to_vec());
    let loss = resid.mapv(|r| r * r).sum() / m;

    let mut g = params.zeros_like();
    let gt = &mut g.tensors;
    let dy = resid.mapv(|r| 2.0 * r / m);
    let dy_col = dy.view().insert_axis(Axis(1));

    gt[WH] = c.z.t().dot(&dy_col);
    gt[BH][[0, 0]] = dy.sum();
    let dz = dy_col.dot(&p[WH].t());

    // feed-forward branch
    gt[W2] = c.act.t().dot(&dz);
    gt[B2] = dz.sum_axis(Axis(0)).insert_axis(Axis(0));
    let mut dpre = dz.dot(&p[W2].t());
    ndarray::Zip::from(&mut dpre).and(&c.pre).for_each(|g, &v| {
        if v <= 0.0 {
            *g = 0.0;
        }
    });
    gt[W1] = c.n2.t().dot(&dpre);
    gt[B1] = dpre.sum_axis(Axis(0)).insert_axis(Axis(0));
    let dn2 = dpre.dot(&p[W1].t());
    let (mut g_g2, mut g_b2) = (Array2::zeros((1, dn2.ncols())), Array2::zeros((1, dn2.ncols())));
    let dh_ln = layer_norm_backward(&dn2, &p[LN2_G], &c.ln2, &mut g_g2, &mut g_b2);
    gt[LN2_G] = g_g2;
    gt[LN2_B] = g_b2;
    let dh = &dz + &dh_ln;

    // attention branch
    gt[WO] = c.o.t().dot(&dh);
    gt[BO] = dh.sum_axis(Axis(0)).insert_axis(Axis(0));
    let d_o = dh.dot(&p[WO].t());
    let d = p[EMBED_W].ncols();
    let dhd = d / heads;
    let scale = 1.0 / (dhd as f64).sqrt();
    let mut dq = Array2::zeros(c.q.raw_dim());
    let mut dk = Array2::zeros(c.k.raw_dim());
    let mut dv = Array2::zeros(c.v.raw_dim());
    for (hd, a) in c.attn.iter().enumerate() {
        let cols = s![.., hd * dhd..(hd + 1) * dhd];
        let d_oh = d_o.slice(cols);
        let da = d_oh.dot(&c.v.slice(cols).t());
        dv.slice_mut(cols).assign(&a.t().dot(&d_oh));
        let row_dot = (&da * a).sum_axis(Axis(1)).insert_axis(Axis(1));
        let ds = a * &(&da - &row_dot) * scale;
        dq.slice_mut(cols).assign(&ds.dot(&c.k.slice(cols)));
        dk.slice_mut(cols).assign(&ds.t().dot(&c.q.slice(cols)));
    }
    let n1_q = rows(&c.n1, queries);
    gt[WQ] = n1_q.t().dot(&dq);
    gt[BQ] = dq.sum_axis(Axis(0)).insert_axis(Axis(0));
    gt[WK] = c.n1.t().dot(&dk);
    gt[BK] = dk.sum_axis(Axis(0)).insert_axis(Axis(0));
    gt[WV] = c.n1.t().dot(&dv);
    gt[BV] = dv.sum_axis(Axis(0)).insert_axis(Axis(0));
    let mut dn1 = dk.dot(&p[WK].t()) + dv.dot(&p[WV].t());
    let dn1_q = dq.dot(&p[WQ].t());
    for (r, &t) in queries.iter().enumerate() {
        let mut row = dn1.row_mut(t);
        row += &dn1_q.row(r);
    }
    let (mut g_g1, mut g_b1) = (Array2::zeros((1, d)), Array2::zeros((1, d)));
    let mut de = layer_norm_backward(&dn1, &p[LN1_G], &c.ln1, &mut g_g1, &mut g_b1);
    gt[LN1_G] = g_g1;
    gt[LN1_B] = g_b1;
    for (r, &t) in queries.iter().enumerate() {
        let mut row = de.row_mut(t);
        row += &dh.row(r);
    }
    gt[EMBED_W] = x.t().dot(&de);
    gt[EMBED_B] = de.sum_axis(Axis(0)).insert_axis(Axis(0));
    (loss, g)
}

/// Trained interpolator together with the channel table it attends over.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionInterpolatorModel {
    pub subscale: SubscaleId,
    pub channel: String,
    pub hyper: AttentionHyper,
    pub feature_names: Vec<String>,
    pub dates: Vec<NaiveDate>,
    pub inputs: Array2<f64>,
    pub params: Params,
    /// Mean squared error per epoch, in scaled units.
    pub trace: Vec<f64>,
}

struct TrainingProblem<'a> {
    x: ArrayView2<'a, f64>,
    pe: Array2<f64>,
    queries: Vec<usize>,
    targets: Vec<f64>,
}

fn day_offsets(dates: &[NaiveDate]) -> Vec<f64> {
    dates.iter().map(|d| (*d - dates[0]).num_days() as f64).collect()
}

fn table_matrix(table: &FeatureFrame) -> Result<Array2<f64>> {
    let (t, d_in) = (table.n_rows(), table.columns.len());
    if t == 0 || d_in == 0 {
        return Err(Error::InvalidInput("attention input table is empty".into()));
    }
    let flat: Vec<f64> = table.values.iter().flatten().copied().collect();
    Array2::from_shape_vec((t, d_in), flat).map_err(|e| Error::InvalidInput(e.to_string()))
}

fn supervision(
    table: &FeatureFrame,
    visits: &[VisitScore],
) -> Result<(SubscaleId, Vec<usize>, Vec<f64>)> {
    let subscale = visits
        .first()
        .map(|v| v.subscale)
        .ok_or_else(|| Error::InvalidInput("no visits to supervise the interpolator".into()))?;
    let index: BTreeMap<NaiveDate, usize> =
        table.dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();
    let mut queries = Vec::new();
    let mut targets = Vec::new();
    for v in visits {
        if v.subscale != subscale {
            return Err(Error::InvalidInput("visits must share one subscale".into()));
        }
        let &row = index
            .get(&v.date)
            .ok_or_else(|| Error::OutOfRange(format!("visit {} not in the feature table", v.date)))?;
        queries.push(row);
        targets.push(f64::from(v.rating) / subscale.max_rating());
    }
    Ok((subscale, queries, targets))
}

/// Fits one interpolator on a single channel's feature table.
pub fn train_attention_interpolator(
    table: &FeatureFrame,
    visits: &[VisitScore],
    hyper: AttentionHyper,
) -> Result<AttentionInterpolatorModel> {
    hyper.validate()?;
    let inputs = table_matrix(table)?;
    let (subscale, queries, targets) = supervision(table, visits)?;
    let problem = TrainingProblem {
        x: inputs.view(),
        pe: positional_encoding(&day_offsets(&table.dates), hyper.d_model),
        queries,
        targets,
    };
    let mean_target = problem.targets.iter().sum::<f64>() / problem.targets.len() as f64;
    let mut params = Params::init(inputs.ncols(), &hyper, mean_target);
    let mut trace = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        let (loss, grad) = loss_and_grad(
            &params,
            hyper.heads,
            problem.x,
            &problem.pe,
            &problem.queries,
            &problem.targets,
        );
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        trace.push(loss);
        for (w, g) in params.tensors.iter_mut().zip(&grad.tensors) {
            w.scaled_add(-hyper.learning_rate, g);
        }
        if !params.is_finite() {
            return Err(Error::Divergence { epoch });
        }
    }
    let channel = table
        .columns
        .first()
        .and_then(|c| crate::preprocess::column_channel(c))
        .unwrap_or_default()
        .to_string();
    Ok(AttentionInterpolatorModel {
        subscale,
        channel,
        hyper,
        feature_names: table.columns.clone(),
        dates: table.dates.clone(),
        inputs,
        params,
        trace,
    })
}

impl AttentionInterpolatorModel {
    /// Raw head outputs (rating units, unclamped) at table rows `queries`.
    pub fn forward_rows(&self, queries: &[usize]) -> Vec<f64> {
        let pe = positional_encoding(&day_offsets(&self.dates), self.hyper.d_model);
        let (y, _) = forward(&self.params, self.hyper.heads, self.inputs.view(), &pe, queries);
        y.iter().map(|v| v * self.subscale.max_rating()).collect()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.trace.last().copied()
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            format: "alscast-attention-v1".into(),
            subscale: self.subscale,
            channel: self.channel.clone(),
            hyper: self.hyper,
            feature_names: self.feature_names.clone(),
            dates: self.dates.clone(),
            inputs: TensorDoc::from_array("inputs", &self.inputs),
            tensors: PARAM_NAMES
                .iter()
                .zip(&self.params.tensors)
                .map(|(n, t)| TensorDoc::from_array(n, t))
                .collect(),
            trace: self.trace.clone(),
        }
    }

    pub fn from_document(doc: ModelDocument) -> Result<Self> {
        if doc.tensors.len() != PARAM_NAMES.len()
            || doc.tensors.iter().zip(PARAM_NAMES).any(|(t, n)| t.name != n)
        {
            return Err(Error::InvalidInput("attention model tensors out of order".into()));
        }
        let tensors = doc
            .tensors
            .iter()
            .map(TensorDoc::to_array)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            subscale: doc.subscale,
            channel: doc.channel,
            hyper: doc.hyper,
            feature_names: doc.feature_names,
            dates: doc.dates,
            inputs: doc.inputs.to_array()?,
            params: Params { tensors },
            trace: doc.trace,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_document())
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: ModelDocument =
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        Self::from_document(doc)
    }
}

/// Persisted form: every tensor by name with its shape and row-major values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    pub subscale: SubscaleId,
    pub channel: String,
    pub hyper: AttentionHyper,
    pub feature_names: Vec<String>,
    pub dates: Vec<NaiveDate>,
    pub inputs: TensorDoc,
    pub tensors: Vec<TensorDoc>,
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorDoc {
    pub name: String,
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

impl TensorDoc {
    fn from_array(name: &str, a: &Array2<f64>) -> Self {
        Self {
            name: name.into(),
            shape: [a.nrows(), a.ncols()],
            values: a.iter().copied().collect(),
        }
    }

    fn to_array(&self) -> Result<Array2<f64>> {
        Array2::from_shape_vec((self.shape[0], self.shape[1]), self.values.clone())
            .map_err(|e| Error::InvalidInput(format!("tensor {}: {e}", self.name)))
    }
}

/// Head outputs at `dates`, clamped to the rating range.
pub fn attention_interpolate(
    model: &AttentionInterpolatorModel,
    dates: &[NaiveDate],
) -> Result<PseudoLabelSeries> {
    let index: BTreeMap<NaiveDate, usize> =
        model.dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();
    let queries = dates
        .iter()
        .map(|d| index.get(d).copied().ok_or_else(|| Error::OutOfRange(d.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let y = model.forward_rows(&queries);
    Ok(PseudoLabelSeries {
        subscale: model.subscale,
        technique: Technique::SelfAttention,
        points: dates
            .iter()
            .zip(y)
            .map(|(d, v)| (*d, model.subscale.clamp(v)))
            .collect(),
    })
}

/// Outcome of comparing analytic and central-difference gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub checked: usize,
    pub skipped: usize,
    pub worst_relative_error: f64,
}

/// Central differences with step `h` on every parameter entry of a freshly
/// initialised model whose weights are jittered by `U(-0.3, 0.3)` from
/// `perturb_seed`. Entries where both gradients are below 1e-8 are skipped.
pub fn gradient_check(
    table: &FeatureFrame,
    visits: &[VisitScore],
    hyper: AttentionHyper,
    perturb_seed: u64,
    h: f64,
) -> Result<GradientCheck> {
    hyper.validate()?;
    let x = table_matrix(table)?;
    let (_, queries, targets) = supervision(table, visits)?;
    let pe = positional_encoding(&day_offsets(&table.dates), hyper.d_model);
    let mut params = Params::init(x.ncols(), &hyper, 0.6);
    let mut rng = PortableRng::new(perturb_seed);
    for t in &mut params.tensors {
        t.mapv_inplace(|w| w + rng.uniform(-0.3, 0.3));
    }
    let loss = |p: &Params| loss_and_grad(p, hyper.heads, x.view(), &pe, &queries, &targets);
    let (_, grad) = loss(&params);
    let mut out = GradientCheck {
        checked: 0,
        skipped: 0,
        worst_relative_error: 0.0,
    };
    for ti in 0..params.tensors.len() {
        let ncols = params.tensors[ti].ncols();
        for idx in 0..params.tensors[ti].len() {
            let at = [idx / ncols, idx % ncols];
            let orig = params.tensors[ti][at];
            params.tensors[ti][at] = orig + h;
            let (lp, _) = loss(&params);
            params.tensors[ti][at] = orig - h;
            let (lm, _) = loss(&params);
            params.tensors[ti][at] = orig;
            let numeric = (lp - lm) / (2.0 * h);
            let analytic = grad.tensors[ti][at];
            let scale = analytic.abs().max(numeric.abs());
            if scale < 1e-8 {
                out.skipped += 1;
                continue;
            }
            out.worst_relative_error = out.worst_relative_error.max((analytic - numeric).abs() / scale);
            out.checked += 1;
        }
    }
    Ok(out)
}
