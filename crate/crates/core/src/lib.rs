//! Daily functional-rating forecasts from in-home sensor streams.
//!
//! Stages: [`synth`] or [`ingest`] produce a cohort, [`preprocess`] builds
//! daily feature frames, [`interpolate`] turns sparse visits into daily
//! pseudo-labels, [`learning`] fits boosted-tree models ([`gbtree`],
//! [`tuning`]) and [`eval`] scores them. [`pipeline`] wires the stages
//! together through files on disk.

pub mod error;
pub mod eval;
pub mod gbtree;
pub mod ingest;
pub mod interpolate;
pub mod learning;
pub mod model;
pub mod par;
pub mod pipeline;
pub mod preprocess;
pub mod rng;
pub mod synth;
pub mod tuning;

pub use error::{Error, Result};
