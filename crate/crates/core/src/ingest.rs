//! `sensors.csv` / `visits.csv` reading and writing.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveDateTime};

use crate::error::{Error, Result};
use crate::model::{ParticipantId, SensorReading, SubscaleId, VisitScore};

pub const SENSORS_FILE: &str = "sensors.csv";
pub const VISITS_FILE: &str = "visits.csv";
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";
pub const DATE_FORMAT: &str = "%Y-%m-%d";

pub fn format_value(v: f64) -> String {
    format!("{v:.6}")
}

pub(crate) fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))
}

pub(crate) fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))
}

pub(crate) fn parse_f64(path: &Path, line: u64, s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::parse(path, format!("line {line}: bad number {s:?}")))
}

pub(crate) fn parse_date(path: &Path, line: u64, s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), DATE_FORMAT)
        .map_err(|_| Error::parse(path, format!("line {line}: bad date {s:?}")))
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn field<'r>(path: &Path, record: &'r csv::StringRecord, i: usize) -> Result<&'r str> {
    record
        .get(i)
        .ok_or_else(|| Error::parse(path, format!("line {}: missing column {i}", line_of(record))))
}

pub fn write_sensors(path: &Path, readings: &[SensorReading]) -> Result<()> {
    let mut w = writer(path)?;
    let wrap = |e| Error::csv(path, e);
    w.write_record(["participant_id", "timestamp", "channel", "value"])
        .map_err(wrap)?;
    for r in readings {
        w.write_record([
            r.participant.as_str(),
            &r.timestamp.format(TIMESTAMP_FORMAT).to_string(),
            &r.channel,
            &format_value(r.value),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_visits(path: &Path, visits: &[VisitScore]) -> Result<()> {
    let mut w = writer(path)?;
    let wrap = |e| Error::csv(path, e);
    w.write_record(["participant_id", "date", "subscale", "rating"])
        .map_err(wrap)?;
    for v in visits {
        w.write_record([
            v.participant.as_str(),
            &v.date.format(DATE_FORMAT).to_string(),
            v.subscale.name(),
            &v.rating.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_sensors(path: &Path) -> Result<Vec<SensorReading>> {
    let mut rdr = reader(path)?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let line = line_of(&record);
        let ts = field(path, &record, 1)?;
        let timestamp = ts
            .trim()
            .parse::<NaiveDateTime>()
            .map_err(|_| Error::parse(path, format!("line {line}: bad timestamp {ts:?}")))?;
        out.push(SensorReading {
            participant: ParticipantId::new(field(path, &record, 0)?.trim()),
            timestamp,
            channel: field(path, &record, 2)?.trim().to_string(),
            value: parse_f64(path, line, field(path, &record, 3)?)?,
        });
    }
    Ok(out)
}

pub fn read_visits(path: &Path) -> Result<Vec<VisitScore>> {
    let mut rdr = reader(path)?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let line = line_of(&record);
        let subscale: SubscaleId = field(path, &record, 2)?
            .trim()
            .parse()
            .map_err(|e: Error| Error::parse(path, format!("line {line}: {e}")))?;
        let rating = field(path, &record, 3)?;
        let rating = rating
            .trim()
            .parse::<i32>()
            .map_err(|_| Error::parse(path, format!("line {line}: bad rating {rating:?}")))?;
        out.push(VisitScore {
            participant: ParticipantId::new(field(path, &record, 0)?.trim()),
            date: parse_date(path, line, field(path, &record, 1)?)?,
            subscale,
            rating,
        });
    }
    Ok(out)
}

/// Reads `sensors.csv` and `visits.csv` from `dir`.
pub fn read_cohort_dir(dir: &Path) -> Result<(Vec<SensorReading>, Vec<VisitScore>)> {
    let sensors = read_sensors(&dir.join(SENSORS_FILE))?;
    let visits = read_visits(&dir.join(VISITS_FILE))?;
    Ok((sensors, visits))
}

pub fn cohort_paths(dir: &Path) -> [PathBuf; 2] {
    [dir.join(SENSORS_FILE), dir.join(VISITS_FILE)]
}
