use chrono::NaiveDate;

use super::{Knots, PseudoLabelSeries};
use crate::error::Result;
use crate::model::{Technique, VisitScore};

pub(crate) fn eval_linear(days: &[f64], values: &[f64], x: f64) -> f64 {
    let i = match days.iter().position(|&d| d >= x) {
        Some(0) | None => return values[if x <= days[0] { 0 } else { days.len() - 1 }],
        Some(i) => i,
    };
    let (x0, x1) = (days[i - 1], days[i]);
    let t = (x - x0) / (x1 - x0);
    values[i - 1] + t * (values[i] - values[i - 1])
}

/// Piecewise-linear interpolation through the visit ratings.
pub fn interp_linear(visits: &[VisitScore], dates: &[NaiveDate]) -> Result<PseudoLabelSeries> {
    let knots = Knots::from_visits(visits)?;
    let points = dates
        .iter()
        .map(|&d| {
            let x = knots.offset(d)?;
            Ok((d, knots.subscale.clamp(eval_linear(&knots.days, &knots.values, x))))
        })
        .collect::<Result<_>>()?;
    Ok(PseudoLabelSeries {
        subscale: knots.subscale,
        technique: Technique::Linear,
        points,
    })
}
