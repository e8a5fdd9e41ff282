//! Day/night segmentation, summary-statistic features, collinearity pruning,
//! min-max scaling and the date join against pseudo-labels.

mod stats;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{NaiveDate, NaiveTime};
use serde::{Deserialize, Serialize};

pub use stats::{quantile_sorted, StatVector, HIST_BINS, STAT_NAMES};

use crate::error::{Error, Result};
use crate::eval::pearson;
use crate::ingest::{self, parse_date, parse_f64, DATE_FORMAT};
use crate::interpolate::PseudoLabelSeries;
use crate::model::{LabeledDataset, LabeledRow, ParticipantId, SensorReading};
use crate::par;

pub const DEFAULT_COLLINEARITY_THRESHOLD: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Period {
    Day,
    Night,
}

impl Period {
    pub const ALL: [Period; 2] = [Period::Day, Period::Night];

    pub fn name(self) -> &'static str {
        match self {
            Period::Day => "day",
            Period::Night => "night",
        }
    }
}

/// Daytime is `[day_start, day_end)`; night is the rest of the calendar day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeriodWindow {
    #[serde(with = "hhmm")]
    pub day_start: NaiveTime,
    #[serde(with = "hhmm")]
    pub day_end: NaiveTime,
}

impl Default for PeriodWindow {
    fn default() -> Self {
        Self {
            day_start: NaiveTime::from_hms_opt(6, 0, 0).expect("valid time"),
            day_end: NaiveTime::from_hms_opt(18, 0, 0).expect("valid time"),
        }
    }
}

impl PeriodWindow {
    pub fn new(day_start: NaiveTime, day_end: NaiveTime) -> Result<Self> {
        if day_start >= day_end {
            return Err(Error::Config(format!(
                "day window start {day_start} must precede end {day_end}"
            )));
        }
        Ok(Self { day_start, day_end })
    }

    pub fn period_of(&self, t: NaiveTime) -> Period {
        if t >= self.day_start && t < self.day_end {
            Period::Day
        } else {
            Period::Night
        }
    }
}

mod hhmm {
    use chrono::NaiveTime;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &NaiveTime, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.format("%H:%M").to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveTime, D::Error> {
        let s = String::deserialize(d)?;
        NaiveTime::parse_from_str(&s, "%H:%M").map_err(serde::de::Error::custom)
    }
}

pub fn column_name(channel: &str, period: Period, stat: &str) -> String {
    format!("{channel}_{}_{stat}", period.name())
}

/// Channel half of a `<channel>_<period>_<stat>` column name.
pub fn column_channel(column: &str) -> Option<&str> {
    column.split('_').next()
}

/// Date-indexed feature matrix, one row per calendar date.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    pub participant: ParticipantId,
    pub dates: Vec<NaiveDate>,
    pub columns: Vec<String>,
    /// Row-major, `values[row][col]`.
    pub values: Vec<Vec<f64>>,
}

impl FeatureFrame {
    pub fn empty(participant: ParticipantId) -> Self {
        Self {
            participant,
            dates: Vec::new(),
            columns: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[j]).collect()
    }

    pub fn select_columns(&self, keep: &[usize]) -> Self {
        Self {
            participant: self.participant.clone(),
            dates: self.dates.clone(),
            columns: keep.iter().map(|&j| self.columns[j].clone()).collect(),
            values: self
                .values
                .iter()
                .map(|row| keep.iter().map(|&j| row[j]).collect())
                .collect(),
        }
    }

    /// Columns belonging to `channel`.
    pub fn channel_table(&self, channel: &str) -> Self {
        let keep: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| column_channel(c) == Some(channel))
            .map(|(j, _)| j)
            .collect();
        self.select_columns(&keep)
    }

    pub fn channels(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.columns.iter().filter_map(|c| column_channel(c)).collect();
        set.into_iter().map(str::to_string).collect()
    }

    pub fn filter_rows(&self, mut keep: impl FnMut(NaiveDate) -> bool) -> Self {
        let mut out = Self {
            participant: self.participant.clone(),
            dates: Vec::new(),
            columns: self.columns.clone(),
            values: Vec::new(),
        };
        for (d, row) in self.dates.iter().zip(&self.values) {
            if keep(*d) {
                out.dates.push(*d);
                out.values.push(row.clone());
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = ingest::writer(path)?;
        let wrap = |e| Error::csv(path, e);
        let mut header = vec!["date".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).map_err(wrap)?;
        for (d, row) in self.dates.iter().zip(&self.values) {
            let mut rec = vec![d.format(DATE_FORMAT).to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path, participant: ParticipantId) -> Result<Self> {
        let mut rdr = ingest::reader(path)?;
        let header = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
        if header.get(0) != Some("date") {
            return Err(Error::parse(path, "first column must be date"));
        }
        let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut frame = Self {
            participant,
            dates: Vec::new(),
            columns,
            values: Vec::new(),
        };
        for record in rdr.records() {
            let record = record.map_err(|e| Error::csv(path, e))?;
            let line = record.position().map_or(0, |p| p.line());
            frame.dates.push(parse_date(path, line, &record[0])?);
            let row = record
                .iter()
                .skip(1)
                .map(|s| parse_f64(path, line, s))
                .collect::<Result<Vec<_>>>()?;
            if row.len() != frame.columns.len() {
                return Err(Error::parse(path, format!("line {line}: wrong column count")));
            }
            frame.values.push(row);
        }
        Ok(frame)
    }
}

/// Builds one row per calendar date with a full [`StatVector`] for every
/// `(channel, period)` pair. Pairs without readings on a date keep the
/// zero-count convention values.
pub fn segment_and_summarize(readings: &[SensorReading], window: &PeriodWindow) -> FeatureFrame {
    let Some(first) = readings.first() else {
        return FeatureFrame::empty(ParticipantId::new(""));
    };
    let participant = first.participant.clone();
    let mut dates = BTreeSet::new();
    let mut groups: BTreeMap<(&str, Period), BTreeMap<NaiveDate, Vec<f64>>> = BTreeMap::new();
    for r in readings {
        let date = r.timestamp.date();
        dates.insert(date);
        groups
            .entry((r.channel.as_str(), window.period_of(r.timestamp.time())))
            .or_default()
            .entry(date)
            .or_default()
            .push(r.value);
    }
    let dates: Vec<NaiveDate> = dates.into_iter().collect();
    let channels: BTreeSet<&str> = groups.keys().map(|(c, _)| *c).collect();
    let pairs: Vec<(&str, Period)> = channels
        .iter()
        .flat_map(|&c| Period::ALL.map(|p| (c, p)))
        .collect();

    // per (channel, period): one StatVector per date
    let blocks: Vec<Vec<StatVector>> = par::map(&pairs, |key| {
        let by_date = groups.get(key);
        dates
            .iter()
            .map(|d| {
                by_date
                    .and_then(|m| m.get(d))
                    .map_or_else(StatVector::default, |v| StatVector::from_values(v))
            })
            .collect()
    });

    let mut named: Vec<(String, usize, usize)> = Vec::new();
    for (b, (channel, period)) in pairs.iter().enumerate() {
        for (s, stat) in STAT_NAMES.iter().enumerate() {
            named.push((column_name(channel, *period, stat), b, s));
        }
    }
    named.sort_by(|a, b| a.0.cmp(&b.0));

    let values = (0..dates.len())
        .map(|i| {
            named
                .iter()
                .map(|&(_, b, s)| blocks[b][i].to_array()[s])
                .collect()
        })
        .collect();
    FeatureFrame {
        participant,
        dates,
        columns: named.into_iter().map(|(n, _, _)| n).collect(),
        values,
    }
}

fn has_variance(col: &[f64]) -> bool {
    col.iter().any(|&v| v != col[0])
}

/// Drops zero-variance columns, then any column whose |r| with an earlier
/// retained column exceeds `threshold`, walking columns in name order.
pub fn prune_collinear(frame: &FeatureFrame, threshold: f64) -> (FeatureFrame, Vec<String>) {
    let mut order: Vec<usize> = (0..frame.columns.len()).collect();
    order.sort_by(|&a, &b| frame.columns[a].cmp(&frame.columns[b]));
    let cols: Vec<Vec<f64>> = (0..frame.columns.len()).map(|j| frame.column(j)).collect();

    let mut dropped = Vec::new();
    let mut kept: Vec<usize> = Vec::new();
    let candidates: Vec<usize> = order
        .into_iter()
        .filter(|&j| {
            let ok = frame.n_rows() > 1 && has_variance(&cols[j]);
            if !ok {
                dropped.push(frame.columns[j].clone());
            }
            ok
        })
        .collect();
    for j in candidates {
        let collinear = kept.iter().any(|&k| {
            pearson(&cols[k], &cols[j]).map_or(false, |r| r.abs() > threshold)
        });
        if collinear {
            dropped.push(frame.columns[j].clone());
        } else {
            kept.push(j);
        }
    }
    dropped.sort();
    (frame.select_columns(&kept), dropped)
}

/// Per-column min-max scaling parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub columns: Vec<String>,
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl Scaler {
    pub fn fit(frame: &FeatureFrame) -> Result<Self> {
        if frame.n_rows() == 0 {
            return Err(Error::InvalidInput("cannot fit a scaler on an empty frame".into()));
        }
        let n = frame.columns.len();
        let mut mins = vec![f64::INFINITY; n];
        let mut maxs = vec![f64::NEG_INFINITY; n];
        for row in &frame.values {
            for (j, &v) in row.iter().enumerate() {
                mins[j] = mins[j].min(v);
                maxs[j] = maxs[j].max(v);
            }
        }
        Ok(Self {
            columns: frame.columns.clone(),
            mins,
            maxs,
        })
    }

    pub fn scale(&self, j: usize, v: f64) -> f64 {
        let span = self.maxs[j] - self.mins[j];
        if span > 0.0 {
            ((v - self.mins[j]) / span).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    pub fn apply(&self, frame: &FeatureFrame) -> Result<FeatureFrame> {
        if frame.columns != self.columns {
            return Err(Error::InvalidInput("scaler columns do not match frame".into()));
        }
        let values = frame
            .values
            .iter()
            .map(|row| row.iter().enumerate().map(|(j, &v)| self.scale(j, v)).collect())
            .collect();
        Ok(FeatureFrame {
            values,
            ..frame.clone()
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = ingest::writer(path)?;
        let wrap = |e| Error::csv(path, e);
        w.write_record(["column", "min", "max"]).map_err(wrap)?;
        for j in 0..self.columns.len() {
            w.write_record([
                self.columns[j].clone(),
                self.mins[j].to_string(),
                self.maxs[j].to_string(),
            ])
            .map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = ingest::reader(path)?;
        let mut out = Self {
            columns: Vec::new(),
            mins: Vec::new(),
            maxs: Vec::new(),
        };
        for record in rdr.records() {
            let record = record.map_err(|e| Error::csv(path, e))?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != 3 {
                return Err(Error::parse(path, format!("line {line}: expected 3 fields")));
            }
            out.columns.push(record[0].to_string());
            out.mins.push(parse_f64(path, line, &record[1])?);
            out.maxs.push(parse_f64(path, line, &record[2])?);
        }
        Ok(out)
    }
}

/// Scales every column to `[0, 1]` by its own min and max.
pub fn minmax_normalize(frame: &FeatureFrame) -> Result<(FeatureFrame, Scaler)> {
    let scaler = Scaler::fit(frame)?;
    Ok((scaler.apply(frame)?, scaler))
}

/// Inner join of feature rows and label values on date.
pub fn pivot_join(frame: &FeatureFrame, labels: &PseudoLabelSeries) -> Result<LabeledDataset> {
    let by_date: BTreeMap<NaiveDate, f64> = labels.points.iter().copied().collect();
    let mut rows: Vec<LabeledRow> = frame
        .dates
        .iter()
        .zip(&frame.values)
        .filter_map(|(d, feats)| {
            by_date.get(d).map(|&target| LabeledRow {
                participant: frame.participant.clone(),
                date: *d,
                features: feats.clone(),
                target,
            })
        })
        .collect();
    if rows.is_empty() {
        return Err(Error::NoOverlap);
    }
    rows.sort_by_key(|r| r.date);
    LabeledDataset::new(frame.columns.clone(), labels.subscale, labels.technique, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SubscaleId, Technique};
    use crate::rng::PortableRng;
    use chrono::Duration;

    fn day(i: i64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, 3, 1).unwrap() + Duration::days(i)
    }

    fn frame(columns: &[&str], cols: Vec<Vec<f64>>) -> FeatureFrame {
        let n = cols[0].len();
        FeatureFrame {
            participant: ParticipantId::new("P1"),
            dates: (0..n as i64).map(day).collect(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            values: (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect(),
        }
    }

    fn reading(d: i64, hour: u32, channel: &str, value: f64) -> SensorReading {
        SensorReading {
            participant: ParticipantId::new("P1"),
            timestamp: day(d).and_hms_opt(hour, 0, 0).unwrap(),
            channel: channel.into(),
            value,
        }
    }

    #[test]
    fn default_window_boundaries() {
        let w = PeriodWindow::default();
        let t = |h, m| NaiveTime::from_hms_opt(h, m, 0).unwrap();
        assert_eq!(w.period_of(t(6, 0)), Period::Day);
        assert_eq!(w.period_of(t(17, 59)), Period::Day);
        assert_eq!(w.period_of(t(18, 0)), Period::Night);
        assert_eq!(w.period_of(t(5, 59)), Period::Night);
        assert!(PeriodWindow::new(t(18, 0), t(6, 0)).is_err());
    }

    #[test]
    fn summarize_splits_periods_and_fills_gaps() {
        let readings = vec![
            reading(0, 8, "pulse", 1.0),
            reading(0, 9, "pulse", 2.0),
            reading(0, 10, "pulse", 3.0),
            reading(0, 22, "pulse", 7.0),
            reading(1, 2, "pulse", 4.0),
        ];
        let f = segment_and_summarize(&readings, &PeriodWindow::default());
        assert_eq!(f.dates, vec![day(0), day(1)]);
        assert_eq!(f.columns.len(), 2 * STAT_NAMES.len());
        let sorted = {
            let mut c = f.columns.clone();
            c.sort();
            c
        };
        assert_eq!(f.columns, sorted);
        let col = |name: &str| f.columns.iter().position(|c| c == name).unwrap();
        assert_eq!(f.values[0][col("pulse_day_mean")], 2.0);
        assert_eq!(f.values[0][col("pulse_day_count")], 3.0);
        assert_eq!(f.values[0][col("pulse_night_mean")], 7.0);
        assert_eq!(f.values[1][col("pulse_day_count")], 0.0);
        assert_eq!(f.values[1][col("pulse_day_variance")], 0.0);
        assert_eq!(f.values[1][col("pulse_night_mean")], 4.0);
    }

    #[test]
    fn empty_readings_give_empty_frame() {
        let f = segment_and_summarize(&[], &PeriodWindow::default());
        assert_eq!(f.n_rows(), 0);
        assert!(f.columns.is_empty());
    }

    #[test]
    fn prune_duplicate_and_negation() {
        let a = vec![1.0, 3.0, 2.0, 5.0];
        let f = frame(&["a", "b"], vec![a.clone(), a.clone()]);
        let (kept, dropped) = prune_collinear(&f, 0.95);
        assert_eq!(kept.columns, vec!["a"]);
        assert_eq!(dropped, vec!["b"]);

        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        let f = frame(&["b", "a"], vec![neg, a]);
        let (kept, dropped) = prune_collinear(&f, 0.95);
        assert_eq!(kept.columns, vec!["a"]);
        assert_eq!(dropped, vec!["b"]);
    }

    #[test]
    fn prune_drops_constant_first() {
        let f = frame(&["a", "b"], vec![vec![2.0; 5], vec![1.0, 2.0, 3.0, 5.0, 8.0]]);
        let (kept, dropped) = prune_collinear(&f, 0.95);
        assert_eq!(kept.columns, vec!["b"]);
        assert_eq!(dropped, vec!["a"]);
    }

    #[test]
    fn prune_keeps_independent_columns() {
        let mut rng = PortableRng::new(9);
        let a: Vec<f64> = (0..200).map(|_| rng.next_f64()).collect();
        let b: Vec<f64> = (0..200).map(|_| rng.next_f64()).collect();
        // oracle r from plain sums
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let sab: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let saa: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let sbb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        let r = sab / (saa * sbb).sqrt();
        assert!(r.abs() < 0.95);
        let f = frame(&["a", "b"], vec![a, b]);
        let (kept, dropped) = prune_collinear(&f, 0.95);
        assert_eq!(kept.columns.len(), 2);
        assert!(dropped.is_empty());
    }

    #[test]
    fn prune_is_idempotent() {
        let mut rng = PortableRng::new(4);
        let base: Vec<f64> = (0..50).map(|_| rng.next_f64()).collect();
        let cols: Vec<Vec<f64>> = (0..6)
            .map(|k| base.iter().map(|v| v * (k as f64 + 1.0) + rng.next_f64() * 0.1 * k as f64).collect())
            .collect();
        let f = frame(&["a", "b", "c", "d", "e", "f"], cols);
        let (once, _) = prune_collinear(&f, 0.95);
        let (twice, dropped) = prune_collinear(&once, 0.95);
        assert!(dropped.is_empty());
        assert_eq!(once, twice);
    }

    #[test]
    fn normalize_examples() {
        let f = frame(&["x"], vec![vec![2.0, 4.0, 6.0]]);
        let (n, scaler) = minmax_normalize(&f).unwrap();
        assert_eq!(n.column(0), vec![0.0, 0.5, 1.0]);
        assert_eq!(scaler.scale(0, 8.0), 1.0);
        assert_eq!(scaler.scale(0, 0.0), 0.0);

        let f = frame(&["x"], vec![vec![7.0, 7.0]]);
        assert_eq!(minmax_normalize(&f).unwrap().0.column(0), vec![0.0, 0.0]);
    }

    #[test]
    fn normalize_is_idempotent() {
        let mut rng = PortableRng::new(12);
        let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..40).map(|_| rng.normal(5.0, 3.0)).collect()).collect();
        let (once, _) = minmax_normalize(&frame(&["a", "b", "c"], cols)).unwrap();
        let (twice, _) = minmax_normalize(&once).unwrap();
        assert_eq!(once, twice);
        assert!(once.values.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    }

    fn labels(days: &[i64]) -> PseudoLabelSeries {
        PseudoLabelSeries {
            subscale: SubscaleId::Speech,
            technique: Technique::Linear,
            points: days.iter().map(|&d| (day(d), d as f64)).collect(),
        }
    }

    #[test]
    fn join_semantics() {
        let f = frame(&["x"], vec![vec![0.1, 0.2]]);
        let ds = pivot_join(&f, &labels(&[1, 2])).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.rows[0].date, day(1));
        assert_eq!(ds.rows[0].target, 1.0);

        assert_eq!(pivot_join(&f, &labels(&[0, 1])).unwrap().len(), 2);
        assert!(matches!(pivot_join(&f, &labels(&[5])), Err(Error::NoOverlap)));

        let long = frame(&["x"], vec![vec![0.5; 599]]);
        let all: Vec<i64> = (0..599).collect();
        assert_eq!(pivot_join(&long, &labels(&all)).unwrap().len(), 599);
    }

    #[test]
    fn frame_and_scaler_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let f = frame(&["a", "b"], vec![vec![0.1, 1.0 / 3.0], vec![2.5e-7, 9.0]]);
        let path = dir.path().join("features.csv");
        f.write_csv(&path).unwrap();
        assert_eq!(FeatureFrame::read_csv(&path, ParticipantId::new("P1")).unwrap(), f);

        let scaler = Scaler::fit(&f).unwrap();
        let path = dir.path().join("scaler.csv");
        scaler.write_csv(&path).unwrap();
        assert_eq!(Scaler::read_csv(&path).unwrap(), scaler);
    }
}
