//! Shared domain vocabulary: participants, ALSFRS-R subscales, raw readings,
//! clinic visits and the labeled datasets handed to the learners.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum rating of a single subscale item.
pub const SUBSCALE_MAX: f64 = 4.0;
/// Maximum composite rating (12 items x 4).
pub const COMPOSITE_MAX: f64 = 48.0;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParticipantId(pub String);

impl ParticipantId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ParticipantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FunctionalDomain {
    Bulbar,
    FineMotor,
    GrossMotor,
    Respiratory,
}

impl FunctionalDomain {
    pub const ALL: [FunctionalDomain; 4] = [
        FunctionalDomain::Bulbar,
        FunctionalDomain::FineMotor,
        FunctionalDomain::GrossMotor,
        FunctionalDomain::Respiratory,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FunctionalDomain::Bulbar => "Bulbar",
            FunctionalDomain::FineMotor => "Fine Motor",
            FunctionalDomain::GrossMotor => "Gross Motor",
            FunctionalDomain::Respiratory => "Respiratory",
        }
    }

    pub fn members(self) -> [SubscaleId; 3] {
        let start = match self {
            FunctionalDomain::Bulbar => 0,
            FunctionalDomain::FineMotor => 3,
            FunctionalDomain::GrossMotor => 6,
            FunctionalDomain::Respiratory => 9,
        };
        [
            SubscaleId::ITEMS[start],
            SubscaleId::ITEMS[start + 1],
            SubscaleId::ITEMS[start + 2],
        ]
    }
}

/// The twelve ALSFRS-R items plus their composite sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SubscaleId {
    Speech,
    Salivation,
    Swallowing,
    Handwriting,
    Cutting,
    Dressing,
    Turning,
    Walking,
    Stairs,
    Dyspnea,
    Orthopnea,
    Respiratory,
    Composite,
}

impl SubscaleId {
    /// The twelve rated items in questionnaire order.
    pub const ITEMS: [SubscaleId; 12] = [
        SubscaleId::Speech,
        SubscaleId::Salivation,
        SubscaleId::Swallowing,
        SubscaleId::Handwriting,
        SubscaleId::Cutting,
        SubscaleId::Dressing,
        SubscaleId::Turning,
        SubscaleId::Walking,
        SubscaleId::Stairs,
        SubscaleId::Dyspnea,
        SubscaleId::Orthopnea,
        SubscaleId::Respiratory,
    ];

    /// Items followed by the composite.
    pub const ALL: [SubscaleId; 13] = [
        SubscaleId::Speech,
        SubscaleId::Salivation,
        SubscaleId::Swallowing,
        SubscaleId::Handwriting,
        SubscaleId::Cutting,
        SubscaleId::Dressing,
        SubscaleId::Turning,
        SubscaleId::Walking,
        SubscaleId::Stairs,
        SubscaleId::Dyspnea,
        SubscaleId::Orthopnea,
        SubscaleId::Respiratory,
        SubscaleId::Composite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SubscaleId::Speech => "Speech",
            SubscaleId::Salivation => "Salivation",
            SubscaleId::Swallowing => "Swallowing",
            SubscaleId::Handwriting => "Handwriting",
            SubscaleId::Cutting => "Cutting",
            SubscaleId::Dressing => "Dressing",
            SubscaleId::Turning => "Turning",
            SubscaleId::Walking => "Walking",
            SubscaleId::Stairs => "Stairs",
            SubscaleId::Dyspnea => "Dyspnea",
            SubscaleId::Orthopnea => "Orthopnea",
            SubscaleId::Respiratory => "Respiratory",
            SubscaleId::Composite => "Composite",
        }
    }

    /// `None` for the composite.
    pub fn domain(self) -> Option<FunctionalDomain> {
        use SubscaleId::*;
        match self {
            Speech | Salivation | Swallowing => Some(FunctionalDomain::Bulbar),
            Handwriting | Cutting | Dressing => Some(FunctionalDomain::FineMotor),
            Turning | Walking | Stairs => Some(FunctionalDomain::GrossMotor),
            Dyspnea | Orthopnea | Respiratory => Some(FunctionalDomain::Respiratory),
            Composite => None,
        }
    }

    pub fn is_composite(self) -> bool {
        self == SubscaleId::Composite
    }

    pub fn max_rating(self) -> f64 {
        if self.is_composite() {
            COMPOSITE_MAX
        } else {
            SUBSCALE_MAX
        }
    }

    pub fn clamp(self, value: f64) -> f64 {
        value.clamp(0.0, self.max_rating())
    }
}

impl fmt::Display for SubscaleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SubscaleId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SubscaleId::ALL
            .iter()
            .copied()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown subscale {s:?}")))
    }
}

/// Pseudo-labeling interpolation technique.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Technique {
    Linear,
    Cubic,
    SelfAttention,
}

impl Technique {
    pub const ALL: [Technique; 3] = [Technique::Linear, Technique::Cubic, Technique::SelfAttention];

    pub fn name(self) -> &'static str {
        match self {
            Technique::Linear => "Linear",
            Technique::Cubic => "Cubic",
            Technique::SelfAttention => "SelfAttention",
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Technique {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Technique::ALL
            .iter()
            .copied()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown technique {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitScore {
    pub participant: ParticipantId,
    pub date: NaiveDate,
    pub subscale: SubscaleId,
    pub rating: i32,
}

impl VisitScore {
    pub fn in_range(&self) -> bool {
        self.rating >= 0 && f64::from(self.rating) <= self.subscale.max_rating()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub participant: ParticipantId,
    pub timestamp: NaiveDateTime,
    pub channel: String,
    pub value: f64,
}

/// Sums the twelve item ratings recorded for one participant on one date.
pub fn composite_from_subscales(visits: &[VisitScore]) -> Result<VisitScore> {
    let first = visits
        .first()
        .ok_or(Error::MissingSubscale(SubscaleId::ITEMS[0].name()))?;
    let mut seen: BTreeMap<SubscaleId, i32> = BTreeMap::new();
    for v in visits {
        if v.participant != first.participant || v.date != first.date {
            return Err(Error::InvalidInput(
                "composite requires visits from one participant and date".into(),
            ));
        }
        if v.subscale.is_composite() {
            return Err(Error::InvalidInput("composite rating passed as an item".into()));
        }
        if seen.insert(v.subscale, v.rating).is_some() {
            return Err(Error::DuplicateSubscale(v.subscale.name()));
        }
    }
    let mut total = 0;
    for item in SubscaleId::ITEMS {
        total += seen.get(&item).ok_or(Error::MissingSubscale(item.name()))?;
    }
    Ok(VisitScore {
        participant: first.participant.clone(),
        date: first.date,
        subscale: SubscaleId::Composite,
        rating: total,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Finding {
    RatingOutOfRange {
        participant: ParticipantId,
        date: NaiveDate,
        subscale: SubscaleId,
        rating: i32,
    },
    DuplicateVisit {
        participant: ParticipantId,
        date: NaiveDate,
        subscale: SubscaleId,
    },
    NonFiniteReading {
        participant: ParticipantId,
        timestamp: NaiveDateTime,
        channel: String,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.findings.is_empty()
    }
}

pub fn validate_cohort(readings: &[SensorReading], visits: &[VisitScore]) -> ValidationReport {
    let mut findings = Vec::new();
    let mut keys = BTreeSet::new();
    for v in visits {
        if !v.in_range() {
            findings.push(Finding::RatingOutOfRange {
                participant: v.participant.clone(),
                date: v.date,
                subscale: v.subscale,
                rating: v.rating,
            });
        }
        if !keys.insert((v.participant.clone(), v.date, v.subscale)) {
            findings.push(Finding::DuplicateVisit {
                participant: v.participant.clone(),
                date: v.date,
                subscale: v.subscale,
            });
        }
    }
    for r in readings {
        if !r.value.is_finite() {
            findings.push(Finding::NonFiniteReading {
                participant: r.participant.clone(),
                timestamp: r.timestamp,
                channel: r.channel.clone(),
            });
        }
    }
    ValidationReport { findings }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRow {
    pub participant: ParticipantId,
    pub date: NaiveDate,
    pub features: Vec<f64>,
    pub target: f64,
}

/// Feature rows joined with a pseudo-label target.
///
/// Single-participant datasets keep rows strictly ascending by date; pooled
/// cohort datasets built for transfer learning may be in shuffled order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub feature_names: Vec<String>,
    pub subscale: SubscaleId,
    pub technique: Technique,
    pub rows: Vec<LabeledRow>,
}

impl LabeledDataset {
    pub fn new(
        feature_names: Vec<String>,
        subscale: SubscaleId,
        technique: Technique,
        rows: Vec<LabeledRow>,
    ) -> Result<Self> {
        let width = feature_names.len();
        for row in &rows {
            if row.features.len() != width {
                return Err(Error::Dimension {
                    expected: width,
                    got: row.features.len(),
                });
            }
            if !row.target.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite target on {}", row.date)));
            }
        }
        Ok(Self {
            feature_names,
            subscale,
            technique,
            rows,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.target).collect()
    }

    pub fn features(&self) -> Vec<&[f64]> {
        self.rows.iter().map(|r| r.features.as_slice()).collect()
    }

    pub fn is_chronological(&self) -> bool {
        self.rows.windows(2).all(|w| w[0].date < w[1].date)
    }

    pub fn with_rows(&self, rows: Vec<LabeledRow>) -> Self {
        Self {
            feature_names: self.feature_names.clone(),
            subscale: self.subscale,
            technique: self.technique,
            rows,
        }
    }

    /// Restricts the dataset to `names`, in the given order.
    pub fn project(&self, names: &[String]) -> Result<Self> {
        let index: BTreeMap<&str, usize> = self
            .feature_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let cols = names
            .iter()
            .map(|n| {
                index
                    .get(n.as_str())
                    .copied()
                    .ok_or_else(|| Error::InvalidInput(format!("feature {n} not in dataset")))
            })
            .collect::<Result<Vec<_>>>()?;
        let rows = self
            .rows
            .iter()
            .map(|r| LabeledRow {
                participant: r.participant.clone(),
                date: r.date,
                features: cols.iter().map(|&c| r.features[c]).collect(),
                target: r.target,
            })
            .collect();
        Ok(Self {
            feature_names: names.to_vec(),
            subscale: self.subscale,
            technique: self.technique,
            rows,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}
