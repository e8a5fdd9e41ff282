//! Pseudo-label trajectories between clinic visits: piecewise-linear,
//! natural cubic spline, and an ensemble of shallow self-attention
//! regressors (one per sensor channel).

pub mod attention;
mod cubic;
mod linear;

use std::path::Path;

use chrono::{Duration, NaiveDate};

pub use attention::{
    attention_interpolate, gradient_check, train_attention_interpolator, AttentionHyper,
    AttentionInterpolatorModel, GradientCheck,
};
pub use cubic::{interp_cubic, NaturalSpline};
pub use linear::interp_linear;

use crate::error::{Error, Result};
use crate::ingest::{self, parse_date, parse_f64, DATE_FORMAT};
use crate::model::{SubscaleId, Technique, VisitScore};

/// Daily continuous target for one subscale and technique.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabelSeries {
    pub subscale: SubscaleId,
    pub technique: Technique,
    pub points: Vec<(NaiveDate, f64)>,
}

impl PseudoLabelSeries {
    pub fn dates(&self) -> Vec<NaiveDate> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    pub fn file_name(subscale: SubscaleId, technique: Technique) -> String {
        format!("labels_{}_{}.csv", subscale.name(), technique.name())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = ingest::writer(path)?;
        let wrap = |e| Error::csv(path, e);
        w.write_record(["date", "value"]).map_err(wrap)?;
        for (d, v) in &self.points {
            w.write_record([d.format(DATE_FORMAT).to_string(), v.to_string()])
                .map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path, subscale: SubscaleId, technique: Technique) -> Result<Self> {
        let mut rdr = ingest::reader(path)?;
        let mut points = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| Error::csv(path, e))?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != 2 {
                return Err(Error::parse(path, format!("line {line}: expected 2 fields")));
            }
            points.push((parse_date(path, line, &record[0])?, parse_f64(path, line, &record[1])?));
        }
        Ok(Self {
            subscale,
            technique,
            points,
        })
    }
}

/// Visit ratings as `(day offset, value)` knots relative to the first visit.
#[derive(Debug, Clone)]
pub(crate) struct Knots {
    pub subscale: SubscaleId,
    pub start: NaiveDate,
    pub days: Vec<f64>,
    pub values: Vec<f64>,
}

impl Knots {
    pub fn from_visits(visits: &[VisitScore]) -> Result<Self> {
        if visits.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "interpolation needs at least 2 visits, got {}",
                visits.len()
            )));
        }
        let subscale = visits[0].subscale;
        let start = visits[0].date;
        let mut days = Vec::with_capacity(visits.len());
        for (i, v) in visits.iter().enumerate() {
            if v.subscale != subscale || v.participant != visits[0].participant {
                return Err(Error::InvalidInput(
                    "visits must share one participant and subscale".into(),
                ));
            }
            if i > 0 && v.date <= visits[i - 1].date {
                return Err(Error::InvalidInput("visit dates must be strictly increasing".into()));
            }
            days.push((v.date - start).num_days() as f64);
        }
        Ok(Self {
            subscale,
            start,
            days,
            values: visits.iter().map(|v| f64::from(v.rating)).collect(),
        })
    }

    pub fn last_date(&self) -> NaiveDate {
        self.start + Duration::days(*self.days.last().expect("non-empty") as i64)
    }

    /// Day offset of `date`, rejecting dates outside the knot span.
    pub fn offset(&self, date: NaiveDate) -> Result<f64> {
        if date < self.start || date > self.last_date() {
            return Err(Error::OutOfRange(date.to_string()));
        }
        Ok((date - self.start).num_days() as f64)
    }
}

/// Every date from `first` to `last` inclusive.
pub fn daily_grid(first: NaiveDate, last: NaiveDate) -> Vec<NaiveDate> {
    first.iter_days().take_while(|d| *d <= last).collect()
}

/// Dates covered by pseudo-labels for these visits (first to last visit).
pub fn visit_span(visits: &[VisitScore]) -> Option<Vec<NaiveDate>> {
    let first = visits.iter().map(|v| v.date).min()?;
    let last = visits.iter().map(|v| v.date).max()?;
    Some(daily_grid(first, last))
}

/// Pointwise mean of equally gridded series, clamped to the rating range.
pub fn ensemble_average(series: &[PseudoLabelSeries]) -> Result<PseudoLabelSeries> {
    let first = series
        .first()
        .ok_or_else(|| Error::InvalidInput("cannot ensemble an empty list".into()))?;
    for s in series {
        if s.subscale != first.subscale
            || s.technique != first.technique
            || s.points.len() != first.points.len()
            || s.points.iter().zip(&first.points).any(|(a, b)| a.0 != b.0)
        {
            return Err(Error::InvalidInput("ensemble members must share grid, subscale and technique".into()));
        }
    }
    let k = series.len() as f64;
    let points = first
        .points
        .iter()
        .enumerate()
        .map(|(i, (d, _))| {
            let sum: f64 = series.iter().map(|s| s.points[i].1).sum();
            (*d, first.subscale.clamp(sum / k))
        })
        .collect();
    Ok(PseudoLabelSeries {
        subscale: first.subscale,
        technique: first.technique,
        points,
    })
}
