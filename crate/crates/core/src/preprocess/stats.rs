//! Per-period summary statistics.

use serde::{Deserialize, Serialize};

/// Number of equal-width bins used for the mode and entropy.
pub const HIST_BINS: usize = 16;

/// Statistic names in column order.
pub const STAT_NAMES: [&str; 17] = [
    "count", "min", "max", "mean", "median", "mode", "variance", "range", "skew", "kurtosis", "q10",
    "q25", "q75", "q90", "iqr", "cv", "entropy",
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StatVector {
    pub count: f64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    pub mode: f64,
    pub variance: f64,
    pub range: f64,
    pub skew: f64,
    pub kurtosis: f64,
    pub q10: f64,
    pub q25: f64,
    pub q75: f64,
    pub q90: f64,
    pub iqr: f64,
    pub cv: f64,
    pub entropy: f64,
}

impl StatVector {
    pub fn to_array(&self) -> [f64; 17] {
        [
            self.count,
            self.min,
            self.max,
            self.mean,
            self.median,
            self.mode,
            self.variance,
            self.range,
            self.skew,
            self.kurtosis,
            self.q10,
            self.q25,
            self.q75,
            self.q90,
            self.iqr,
            self.cv,
            self.entropy,
        ]
    }

    /// Summary of `values`. An empty slice gives all zeros.
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::default();
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let min = sorted[0];
        let max = sorted[n - 1];
        let nf = n as f64;
        let mean = sorted.iter().sum::<f64>() / nf;
        let range = max - min;

        let (mut variance, mut skew, mut kurtosis, mut cv, mut entropy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let counts = histogram(&sorted, min, max);
        let mode_bin = counts
            .iter()
            .enumerate()
            .fold((0, 0), |best, (i, &c)| if c > best.1 { (i, c) } else { best })
            .0;
        let width = range / HIST_BINS as f64;
        let mode = min + width * (mode_bin as f64 + 0.5);

        if n > 1 {
            let m2 = sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
            variance = m2 * nf / (nf - 1.0);
            if range > 0.0 {
                let m3 = sorted.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / nf;
                let m4 = sorted.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / nf;
                skew = m3 / m2.powf(1.5);
                kurtosis = m4 / (m2 * m2) - 3.0;
            }
            if mean.abs() >= 1e-12 {
                cv = variance.sqrt() / mean;
            }
            entropy = counts
                .iter()
                .filter(|&&c| c > 0)
                .map(|&c| {
                    let p = c as f64 / nf;
                    -p * p.ln()
                })
                .sum::<f64>()
                .max(0.0);
        }
        let q25 = quantile_sorted(&sorted, 0.25);
        let q75 = quantile_sorted(&sorted, 0.75);
        Self {
            count: nf,
            min,
            max,
            mean,
            median: quantile_sorted(&sorted, 0.5),
            mode,
            variance,
            range,
            skew,
            kurtosis,
            q10: quantile_sorted(&sorted, 0.10),
            q25,
            q75,
            q90: quantile_sorted(&sorted, 0.90),
            iqr: q75 - q25,
            cv,
            entropy,
        }
    }
}

/// Linear interpolation between order statistics at position `(n-1)p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return 0.0;
    }
    let pos = (n - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

fn histogram(values: &[f64], min: f64, max: f64) -> [usize; HIST_BINS] {
    let mut counts = [0usize; HIST_BINS];
    let range = max - min;
    for &x in values {
        let bin = if range > 0.0 {
            (((x - min) / range) * HIST_BINS as f64).floor() as usize
        } else {
            0
        };
        counts[bin.min(HIST_BINS - 1)] += 1;
    }
    counts
}
