//! Evaluation records, mean(SD) aggregation and the summary tables.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{pearson, rmse, sample_sd};
use super::taylor::TaylorPoint;
use crate::error::{Error, Result};
use crate::ingest::{reader, writer};
use crate::learning::LearningMethod;
use crate::model::{ParticipantId, SubscaleId, Technique};

pub const METRICS_FILE: &str = "metrics.csv";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RunKey {
    pub participant: ParticipantId,
    pub subscale: SubscaleId,
    pub technique: Technique,
    pub method: LearningMethod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub key: RunKey,
    pub n: usize,
    pub rmse: f64,
    pub r: f64,
    pub sd_pred: f64,
    pub sd_ref: f64,
}

impl EvalRecord {
    pub fn from_predictions(key: RunKey, y: &[f64], yhat: &[f64]) -> Result<Self> {
        Ok(Self {
            key,
            n: y.len(),
            rmse: rmse(y, yhat)?,
            r: pearson(y, yhat)?,
            sd_pred: sample_sd(yhat)?,
            sd_ref: sample_sd(y)?,
        })
    }

    pub fn taylor_point(&self, label: impl Into<String>) -> TaylorPoint {
        TaylorPoint::from_stats(label, self.sd_ref, self.sd_pred, self.r)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MetricsRow {
    participant: String,
    subscale: String,
    interpolation: String,
    method: String,
    n: usize,
    rmse: f64,
    r: f64,
    sd_pred: f64,
    sd_ref: f64,
}

/// Writes records sorted by key with full-precision floats.
pub fn write_metrics(path: &Path, records: &[EvalRecord]) -> Result<()> {
    let mut sorted: Vec<&EvalRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.key.cmp(&b.key));
    let mut w = writer(path)?;
    for rec in sorted {
        w.serialize(MetricsRow {
            participant: rec.key.participant.to_string(),
            subscale: rec.key.subscale.to_string(),
            interpolation: rec.key.technique.to_string(),
            method: rec.key.method.to_string(),
            n: rec.n,
            rmse: rec.rmse,
            r: rec.r,
            sd_pred: rec.sd_pred,
            sd_ref: rec.sd_ref,
        })
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_metrics(path: &Path) -> Result<Vec<EvalRecord>> {
    let mut rdr = reader(path)?;
    let mut out = Vec::new();
    for row in rdr.deserialize::<MetricsRow>() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let parse = |msg: String| Error::parse(path, msg);
        out.push(EvalRecord {
            key: RunKey {
                participant: ParticipantId::new(row.participant),
                subscale: row.subscale.parse().map_err(|e: Error| parse(e.to_string()))?,
                technique: row.interpolation.parse().map_err(|e: Error| parse(e.to_string()))?,
                method: row.method.parse().map_err(|e: Error| parse(e.to_string()))?,
            },
            n: row.n,
            rmse: row.rmse,
            r: row.r,
            sd_pred: row.sd_pred,
            sd_ref: row.sd_ref,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let sd = sample_sd(values).ok()?;
        Some(Self {
            mean,
            sd,
            count: values.len(),
        })
    }

    pub fn cell(&self) -> String {
        format_cell(self.mean, self.sd)
    }
}

/// Groups records by `group_by` and summarises `value` within each group.
pub fn aggregate_mean_sd<K, G, V>(records: &[EvalRecord], group_by: G, value: V) -> BTreeMap<K, MeanSd>
where
    K: Ord,
    G: Fn(&EvalRecord) -> K,
    V: Fn(&EvalRecord) -> f64,
{
    let mut groups: BTreeMap<K, Vec<f64>> = BTreeMap::new();
    for rec in records {
        groups.entry(group_by(rec)).or_default().push(value(rec));
    }
    groups
        .into_iter()
        .filter_map(|(k, v)| MeanSd::of(&v).map(|m| (k, m)))
        .collect()
}

/// Decimal rendering of `x` rounded half away from zero.
///
/// Rounds the shortest round-trip decimal form, so 0.125 gives 0.13.
pub fn format_fixed(x: f64, places: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let repr = format!("{}", x.abs());
    let (int_part, frac_part) = repr.split_once('.').unwrap_or((&repr, ""));
    let mut digits: Vec<u8> = int_part.bytes().map(|b| b - b'0').collect();
    let frac: Vec<u8> = frac_part.bytes().map(|b| b - b'0').collect();
    digits.extend((0..places).map(|i| frac.get(i).copied().unwrap_or(0)));
    if frac.get(places).is_some_and(|&d| d >= 5) {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, 1);
                break;
            }
            i -= 1;
            if digits[i] == 9 {
                digits[i] = 0;
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let split = digits.len() - places;
    let int_str: String = digits[..split].iter().map(|d| char::from(b'0' + d)).collect();
    let frac_str: String = digits[split..].iter().map(|d| char::from(b'0' + d)).collect();
    let body = if places == 0 {
        int_str
    } else {
        format!("{int_str}.{frac_str}")
    };
    let is_zero = digits.iter().all(|&d| d == 0);
    if x < 0.0 && !is_zero {
        format!("-{body}")
    } else {
        body
    }
}

pub fn round_half_away(x: f64, places: usize) -> f64 {
    format_fixed(x, places).parse().unwrap_or(x)
}

/// Table cell "mean(sd)" with two decimals each.
pub fn format_cell(mean: f64, sd: f64) -> String {
    format!("{}({})", format_fixed(mean, 2), format_fixed(sd, 2))
}

const MEAN_ROW: &str = "Mean";

/// Row-by-column grid of cells; rows are the 12 items, a mean row, then Composite.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<String>)>,
}

impl SummaryTable {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = writer(path)?;
        let mut header = vec!["subscale".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).map_err(|e| Error::csv(path, e))?;
        for (label, cells) in &self.rows {
            let mut rec = vec![label.clone()];
            rec.extend(cells.iter().cloned());
            w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Builds a table whose columns are `group` values and whose cells summarise
/// RMSE and r over every record sharing (subscale, group).
fn build_table<G>(records: &[EvalRecord], groups: &[G], group_of: impl Fn(&EvalRecord) -> G, group_label: impl Fn(&G) -> String) -> SummaryTable
where
    G: Ord + Clone,
{
    let rmse = aggregate_mean_sd(records, |r| (group_of(r), r.key.subscale), |r| r.rmse);
    let corr = aggregate_mean_sd(records, |r| (group_of(r), r.key.subscale), |r| r.r);
    let mut columns = Vec::new();
    for g in groups {
        columns.push(format!("{} RMSE", group_label(g)));
        columns.push(format!("{} r", group_label(g)));
    }
    let cell = |m: Option<&MeanSd>| m.map(MeanSd::cell).unwrap_or_default();
    let mut rows = Vec::new();
    for s in SubscaleId::ITEMS {
        let cells = groups
            .iter()
            .flat_map(|g| {
                let k = (g.clone(), s);
                [cell(rmse.get(&k)), cell(corr.get(&k))]
            })
            .collect();
        rows.push((s.to_string(), cells));
    }
    let mean_row = groups
        .iter()
        .flat_map(|g| {
            let item_means = |table: &BTreeMap<(G, SubscaleId), MeanSd>| {
                let v: Vec<f64> = SubscaleId::ITEMS
                    .iter()
                    .filter_map(|&s| table.get(&(g.clone(), s)).map(|m| m.mean))
                    .collect();
                cell(MeanSd::of(&v).as_ref())
            };
            [item_means(&rmse), item_means(&corr)]
        })
        .collect();
    rows.push((MEAN_ROW.to_string(), mean_row));
    let composite = groups
        .iter()
        .flat_map(|g| {
            let k = (g.clone(), SubscaleId::Composite);
            [cell(rmse.get(&k)), cell(corr.get(&k))]
        })
        .collect();
    rows.push((SubscaleId::Composite.to_string(), composite));
    SummaryTable { columns, rows }
}

fn participants(records: &[EvalRecord]) -> Vec<ParticipantId> {
    let mut p: Vec<ParticipantId> = records.iter().map(|r| r.key.participant.clone()).collect();
    p.sort();
    p.dedup();
    p
}

/// Per participant and learning method, summarised over interpolation techniques.
pub fn table4(records: &[EvalRecord]) -> SummaryTable {
    let groups: Vec<(ParticipantId, LearningMethod)> = participants(records)
        .into_iter()
        .flat_map(|p| LearningMethod::ALL.map(|m| (p.clone(), m)))
        .collect();
    build_table(
        records,
        &groups,
        |r| (r.key.participant.clone(), r.key.method),
        |(p, m)| format!("{p} {m}"),
    )
}

/// Per learning method, pooled over participants and techniques.
pub fn table5(records: &[EvalRecord]) -> SummaryTable {
    build_table(records, &LearningMethod::ALL, |r| r.key.method, |m| m.to_string())
}

/// Per participant and interpolation technique, summarised over learning methods.
pub fn table6(records: &[EvalRecord]) -> SummaryTable {
    let groups: Vec<(ParticipantId, Technique)> = participants(records)
        .into_iter()
        .flat_map(|p| Technique::ALL.map(|t| (p.clone(), t)))
        .collect();
    build_table(
        records,
        &groups,
        |r| (r.key.participant.clone(), r.key.technique),
        |(p, t)| format!("{p} {t}"),
    )
}

/// Per interpolation technique, pooled over participants and methods.
pub fn table7(records: &[EvalRecord]) -> SummaryTable {
    build_table(records, &Technique::ALL, |r| r.key.technique, |t| t.to_string())
}

/// One Taylor diagram's worth of points plus its reference SD.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorPanel {
    pub scope: String,
    pub subscale: SubscaleId,
    pub sd_ref: f64,
    pub points: Vec<TaylorPoint>,
}

impl TaylorPanel {
    pub fn file_name(&self) -> String {
        format!("taylor_{}_{}.svg", self.scope, self.subscale)
    }
}

fn panel(scope: String, subscale: SubscaleId, stats: Vec<(String, f64, f64, f64)>) -> Option<TaylorPanel> {
    if stats.is_empty() {
        return None;
    }
    let sd_ref = stats.iter().map(|s| s.1).sum::<f64>() / stats.len() as f64;
    let points = stats
        .into_iter()
        .map(|(label, sd_ref, sd, r)| TaylorPoint::from_stats(label, sd_ref, sd, r))
        .collect();
    Some(TaylorPanel {
        scope,
        subscale,
        sd_ref,
        points,
    })
}

fn point_label(technique: Technique, method: LearningMethod) -> String {
    format!("{technique}/{method}")
}

/// Per-participant panels (one point per technique and method) followed by
/// cohort panels whose points average sd and r across participants.
pub fn taylor_panels(records: &[EvalRecord]) -> Vec<TaylorPanel> {
    let mut sorted: Vec<&EvalRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.key.cmp(&b.key));
    let mut out = Vec::new();
    for p in participants(records) {
        for s in SubscaleId::ALL {
            let stats = sorted
                .iter()
                .filter(|r| r.key.participant == p && r.key.subscale == s)
                .map(|r| (point_label(r.key.technique, r.key.method), r.sd_ref, r.sd_pred, r.r))
                .collect();
            out.extend(panel(p.to_string(), s, stats));
        }
    }
    for s in SubscaleId::ALL {
        let mut stats = Vec::new();
        for t in Technique::ALL {
            for m in LearningMethod::ALL {
                let members: Vec<&&EvalRecord> = sorted
                    .iter()
                    .filter(|r| r.key.subscale == s && r.key.technique == t && r.key.method == m)
                    .collect();
                if members.is_empty() {
                    continue;
                }
                let avg = |f: fn(&EvalRecord) -> f64| members.iter().map(|r| f(r)).sum::<f64>() / members.len() as f64;
                stats.push((point_label(t, m), avg(|r| r.sd_ref), avg(|r| r.sd_pred), avg(|r| r.r)));
            }
        }
        out.extend(panel("cohort".to_string(), s, stats));
    }
    out
}
