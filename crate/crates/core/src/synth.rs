//! Seeded synthetic cohorts with known latent decline.
//!
//! Each item subscale follows a cohort template (a non-increasing
//! piecewise-linear curve over enrollment day) plus a smooth per-participant
//! offset whose size is set by the participant's `offset` magnitude. Sensor
//! channels are a linear mixture of the latent item trajectories on top of a
//! base level, a diurnal swing and Gaussian noise, sampled hourly.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate, NaiveTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest;
use crate::model::{
    composite_from_subscales, ParticipantId, SensorReading, SubscaleId, VisitScore,
};
use crate::par;
use crate::rng::PortableRng;

pub const READINGS_PER_DAY: u32 = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantSpec {
    pub id: String,
    pub enrollment_days: u32,
    pub n_instruments: u32,
    /// Magnitude of the smooth deviation from the cohort templates.
    #[serde(default)]
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub name: String,
    pub base: f64,
    pub noise_sd: f64,
    #[serde(default)]
    pub diurnal_amplitude: f64,
    /// Weight of each latent item trajectory in the channel value.
    #[serde(default)]
    pub mixture: BTreeMap<SubscaleId, f64>,
}

/// Non-increasing piecewise-linear template, `(day, value)` knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeclineTemplate {
    pub subscale: SubscaleId,
    pub points: Vec<(f64, f64)>,
}

impl DeclineTemplate {
    pub fn value_at(&self, day: f64) -> f64 {
        let pts = &self.points;
        if day <= pts[0].0 {
            return pts[0].1;
        }
        for w in pts.windows(2) {
            let ((d0, v0), (d1, v1)) = (w[0], w[1]);
            if day <= d1 {
                return v0 + (v1 - v0) * (day - d0) / (d1 - d0);
            }
        }
        pts[pts.len() - 1].1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub start_date: NaiveDate,
    pub participants: Vec<ParticipantSpec>,
    pub channels: Vec<ChannelSpec>,
    pub cohort_decline: Vec<DeclineTemplate>,
}

fn tpl(subscale: SubscaleId, points: &[(f64, f64)]) -> DeclineTemplate {
    DeclineTemplate {
        subscale,
        points: points.to_vec(),
    }
}

fn channel(name: &str, base: f64, noise_sd: f64, diurnal: f64, mix: &[(SubscaleId, f64)]) -> ChannelSpec {
    ChannelSpec {
        name: name.into(),
        base,
        noise_sd,
        diurnal_amplitude: diurnal,
        mixture: mix.iter().copied().collect(),
    }
}

impl Default for SynthConfig {
    /// Three participants with the enrollment lengths and instrument counts of
    /// the parent study, five bed/room channels and 0.3 participant offsets.
    fn default() -> Self {
        use SubscaleId::*;
        let participants = [("P1", 599, 15), ("P2", 236, 8), ("P3", 219, 8)]
            .iter()
            .map(|&(id, days, n)| ParticipantSpec {
                id: id.into(),
                enrollment_days: days,
                n_instruments: n,
                offset: 0.3,
            })
            .collect();
        let channels = vec![
            channel(
                "pulse",
                62.0,
                2.0,
                4.0,
                &[(Dyspnea, -2.0), (Orthopnea, -1.5), (Walking, -1.0), (Speech, -0.5)],
            ),
            channel(
                "respiration",
                15.0,
                0.8,
                1.0,
                &[(Respiratory, -1.5), (Orthopnea, -1.0), (Swallowing, -0.8), (Salivation, -0.5)],
            ),
            channel(
                "restlessness",
                10.0,
                1.5,
                2.0,
                &[(Turning, -1.5), (Dressing, -1.0), (Salivation, -0.7), (Dyspnea, -0.6)],
            ),
            channel(
                "room-activity-bedroom",
                20.0,
                3.0,
                6.0,
                &[(Turning, 1.0), (Stairs, 1.5), (Handwriting, 1.2), (Cutting, 0.8)],
            ),
            channel(
                "room-activity-living",
                35.0,
                4.0,
                8.0,
                &[(Walking, 2.5), (Stairs, 1.5), (Cutting, 1.0), (Speech, 1.0), (Swallowing, 0.8)],
            ),
        ];
        let cohort_decline = vec![
            tpl(Speech, &[(0.0, 4.0), (60.0, 4.0), (140.0, 3.0), (400.0, 2.5), (520.0, 1.5)]),
            tpl(Salivation, &[(0.0, 4.0), (600.0, 3.7)]),
            tpl(Swallowing, &[(0.0, 4.0), (40.0, 3.6), (120.0, 2.8), (450.0, 2.2)]),
            tpl(Handwriting, &[(0.0, 3.4), (90.0, 3.2), (160.0, 2.0), (500.0, 1.0)]),
            tpl(Cutting, &[(0.0, 3.6), (100.0, 3.0), (300.0, 2.6), (480.0, 1.2)]),
            tpl(Dressing, &[(0.0, 3.8), (50.0, 3.5), (150.0, 2.4), (560.0, 1.4)]),
            tpl(Turning, &[(0.0, 3.9), (120.0, 3.4), (200.0, 2.6), (420.0, 2.0)]),
            tpl(Walking, &[(0.0, 3.5), (80.0, 3.0), (180.0, 2.0), (520.0, 0.8)]),
            tpl(Stairs, &[(0.0, 3.2), (60.0, 2.6), (170.0, 1.4), (380.0, 0.5)]),
            tpl(Dyspnea, &[(0.0, 4.0), (110.0, 3.6), (190.0, 2.9), (500.0, 2.0)]),
            tpl(Orthopnea, &[(0.0, 4.0), (70.0, 3.8), (160.0, 3.0), (540.0, 2.2)]),
            tpl(Respiratory, &[(0.0, 4.0), (600.0, 3.8)]),
        ];
        Self {
            seed: 42,
            start_date: NaiveDate::from_ymd_opt(2023, 1, 2).expect("valid date"),
            participants,
            channels,
            cohort_decline,
        }
    }
}

impl SynthConfig {
    /// Default cohort with every participant offset set to zero.
    pub fn homogeneous() -> Self {
        let mut cfg = Self::default();
        for p in &mut cfg.participants {
            p.offset = 0.0;
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.participants.is_empty() {
            return bad("at least one participant required".into());
        }
        let mut ids = std::collections::BTreeSet::new();
        for p in &self.participants {
            if p.id.is_empty() || !ids.insert(p.id.as_str()) {
                return bad(format!("participant id {:?} is empty or repeated", p.id));
            }
            if p.enrollment_days < 60 {
                return bad(format!("{}: enrollment_days must be >= 60", p.id));
            }
            if p.n_instruments < 2 {
                return bad(format!("{}: n_instruments must be >= 2", p.id));
            }
            if p.n_instruments > p.enrollment_days {
                return bad(format!("{}: more instruments than enrollment days", p.id));
            }
            if !(p.offset.is_finite() && p.offset >= 0.0) {
                return bad(format!("{}: offset must be finite and >= 0", p.id));
            }
        }
        let mut names = std::collections::BTreeSet::new();
        for c in &self.channels {
            if c.name.is_empty() || c.name.contains('_') || c.name.contains(',') {
                return bad(format!("channel name {:?} must be non-empty without '_' or ','", c.name));
            }
            if !names.insert(c.name.as_str()) {
                return bad(format!("channel {} repeated", c.name));
            }
            if !(c.noise_sd.is_finite() && c.noise_sd >= 0.0) {
                return bad(format!("{}: noise_sd must be >= 0", c.name));
            }
            if c.mixture.contains_key(&SubscaleId::Composite) {
                return bad(format!("{}: mixture may only reference item subscales", c.name));
            }
        }
        for item in SubscaleId::ITEMS {
            let n = self.cohort_decline.iter().filter(|t| t.subscale == item).count();
            if n != 1 {
                return bad(format!("exactly one decline template required for {item}, found {n}"));
            }
        }
        for t in &self.cohort_decline {
            if t.subscale.is_composite() || t.points.is_empty() {
                return bad(format!("invalid template for {}", t.subscale));
            }
            for &(_, v) in &t.points {
                if !(0.0..=4.0).contains(&v) {
                    return bad(format!("{}: template values must lie in [0,4]", t.subscale));
                }
            }
            for w in t.points.windows(2) {
                if w[1].0 <= w[0].0 || w[1].1 > w[0].1 {
                    return bad(format!(
                        "{}: template knots must have increasing days and non-increasing values",
                        t.subscale
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Daily latent values starting at the participant's first enrollment day.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTrajectory {
    pub start: NaiveDate,
    pub values: Vec<f64>,
}

impl LatentTrajectory {
    pub fn at(&self, date: NaiveDate) -> Option<f64> {
        let day = (date - self.start).num_days();
        usize::try_from(day).ok().and_then(|d| self.values.get(d).copied())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortData {
    pub readings: Vec<SensorReading>,
    pub visits: Vec<VisitScore>,
    pub latent: BTreeMap<ParticipantId, BTreeMap<SubscaleId, LatentTrajectory>>,
}

/// Visit days spread evenly over the enrollment window, first and last day included.
pub fn visit_days(enrollment_days: u32, n_instruments: u32) -> Vec<u32> {
    let last = f64::from(enrollment_days - 1);
    let n = n_instruments.max(2);
    let mut days: Vec<u32> = (0..n)
        .map(|i| (f64::from(i) * last / f64::from(n - 1)).round() as u32)
        .collect();
    days.dedup();
    days
}

struct ParticipantData {
    id: ParticipantId,
    readings: Vec<SensorReading>,
    visits: Vec<VisitScore>,
    latent: BTreeMap<SubscaleId, LatentTrajectory>,
}

fn generate_participant(config: &SynthConfig, spec: &ParticipantSpec) -> ParticipantData {
    let id = ParticipantId::new(spec.id.clone());
    let days = spec.enrollment_days as usize;
    let horizon = f64::from(spec.enrollment_days);

    let mut offset_rng = PortableRng::substream(config.seed, &format!("offset|{}", spec.id));
    let mut latent = BTreeMap::new();
    for item in SubscaleId::ITEMS {
        let template = config
            .cohort_decline
            .iter()
            .find(|t| t.subscale == item)
            .expect("validated template");
        let trend = offset_rng.standard_normal();
        let wave = offset_rng.standard_normal();
        let period = offset_rng.uniform(120.0, 360.0);
        let phase = offset_rng.uniform(0.0, std::f64::consts::TAU);
        let values = (0..days)
            .map(|d| {
                let day = d as f64;
                let offset = spec.offset
                    * (trend * day / horizon
                        + wave * ((std::f64::consts::TAU * day / period + phase).sin() - phase.sin()));
                item.clamp(template.value_at(day) + offset)
            })
            .collect();
        latent.insert(
            item,
            LatentTrajectory {
                start: config.start_date,
                values,
            },
        );
    }
    let composite: Vec<f64> = (0..days)
        .map(|d| SubscaleId::ITEMS.iter().map(|s| latent[s].values[d]).sum())
        .collect();
    latent.insert(
        SubscaleId::Composite,
        LatentTrajectory {
            start: config.start_date,
            values: composite,
        },
    );

    let mut noise = PortableRng::substream(config.seed, &format!("noise|{}", spec.id));
    let mut readings = Vec::with_capacity(days * READINGS_PER_DAY as usize * config.channels.len());
    for d in 0..days {
        let date = config.start_date + Duration::days(d as i64);
        for hour in 0..READINGS_PER_DAY {
            let timestamp = date.and_time(NaiveTime::from_hms_opt(hour, 0, 0).expect("valid hour"));
            let diurnal = (std::f64::consts::TAU * f64::from(hour) / f64::from(READINGS_PER_DAY)).sin();
            for ch in &config.channels {
                let signal: f64 = ch
                    .mixture
                    .iter()
                    .map(|(s, w)| w * latent[s].values[d])
                    .sum();
                let eps = if ch.noise_sd > 0.0 {
                    noise.normal(0.0, ch.noise_sd)
                } else {
                    0.0
                };
                readings.push(SensorReading {
                    participant: id.clone(),
                    timestamp,
                    channel: ch.name.clone(),
                    value: ch.base + ch.diurnal_amplitude * diurnal + signal + eps,
                });
            }
        }
    }

    let mut visits = Vec::new();
    for day in visit_days(spec.enrollment_days, spec.n_instruments) {
        let date = config.start_date + Duration::days(i64::from(day));
        let items: Vec<VisitScore> = SubscaleId::ITEMS
            .iter()
            .map(|&s| VisitScore {
                participant: id.clone(),
                date,
                subscale: s,
                rating: latent[&s].values[day as usize].round().clamp(0.0, 4.0) as i32,
            })
            .collect();
        let composite = composite_from_subscales(&items).expect("all items present");
        visits.extend(items);
        visits.push(composite);
    }

    ParticipantData {
        id,
        readings,
        visits,
        latent,
    }
}

pub fn generate_cohort(config: &SynthConfig) -> Result<CohortData> {
    config.validate()?;
    let parts = par::map(&config.participants, |p| generate_participant(config, p));
    let mut cohort = CohortData {
        readings: Vec::new(),
        visits: Vec::new(),
        latent: BTreeMap::new(),
    };
    for p in parts {
        cohort.readings.extend(p.readings);
        cohort.visits.extend(p.visits);
        cohort.latent.insert(p.id, p.latent);
    }
    Ok(cohort)
}

/// Writes `sensors.csv` and `visits.csv` into `dir`, returning their paths.
pub fn write_cohort_csv(cohort: &CohortData, dir: &Path) -> Result<Vec<PathBuf>> {
    let [sensors, visits] = ingest::cohort_paths(dir);
    ingest::write_sensors(&sensors, &cohort.readings)?;
    ingest::write_visits(&visits, &cohort.visits)?;
    Ok(vec![sensors, visits])
}

pub fn load_config(path: &Path) -> Result<SynthConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}
