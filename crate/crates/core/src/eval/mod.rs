//! Metrics, aggregate tables and Taylor diagrams.

mod metrics;
pub mod report;
pub mod taylor;

pub use metrics::{centered_rmse, pearson, rmse, sample_sd, CONSTANT_VARIANCE};
pub use report::{aggregate_mean_sd, format_cell, round_half_away, EvalRecord, MeanSd};
pub use taylor::{render_taylor, taylor_point, TaylorPoint};
