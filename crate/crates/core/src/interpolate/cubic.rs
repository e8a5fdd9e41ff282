use chrono::NaiveDate;

use super::{Knots, PseudoLabelSeries};
use crate::error::{Error, Result};
use crate::model::{Technique, VisitScore};

/// Natural cubic spline (zero second derivative at both ends).
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivative at each knot.
    moments: Vec<f64>,
}

impl NaturalSpline {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(Error::InvalidInput("spline needs >= 2 matching knots".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("spline knots must be strictly increasing".into()));
        }
        let mut moments = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior moment equations
            // h[i-1] M[i-1] + 2(h[i-1] + h[i]) M[i] + h[i] M[i+1] = rhs[i]
            let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
            let m = n - 2;
            let mut diag = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            for k in 0..m {
                let i = k + 1;
                diag[k] = 2.0 * (h[i - 1] + h[i]);
                rhs[k] = 6.0 * ((ys[i + 1] - ys[i]) / h[i] - (ys[i] - ys[i - 1]) / h[i - 1]);
            }
            for k in 1..m {
                let w = h[k] / diag[k - 1];
                diag[k] -= w * h[k];
                rhs[k] -= w * rhs[k - 1];
            }
            moments[m] = rhs[m - 1] / diag[m - 1];
            for k in (0..m - 1).rev() {
                moments[k + 1] = (rhs[k] - h[k + 1] * moments[k + 2]) / diag[k];
            }
        }
        Ok(Self { xs, ys, moments })
    }

    pub fn moments(&self) -> &[f64] {
        &self.moments
    }

    fn interval(&self, x: f64) -> usize {
        let n = self.xs.len();
        match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        }
    }

    fn coords(&self, x: f64) -> (usize, f64, f64, f64) {
        let i = self.interval(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        (i, h, a, b)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (i, h, a, b) = self.coords(x);
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.moments[i] + (b * b * b - b) * self.moments[i + 1]) * h * h / 6.0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let (i, h, a, b) = self.coords(x);
        (self.ys[i + 1] - self.ys[i]) / h - (3.0 * a * a - 1.0) / 6.0 * h * self.moments[i]
            + (3.0 * b * b - 1.0) / 6.0 * h * self.moments[i + 1]
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let (i, _, a, b) = self.coords(x);
        a * self.moments[i] + b * self.moments[i + 1]
    }
}

/// Natural cubic spline through the visit ratings, clamped to the rating range.
pub fn interp_cubic(visits: &[VisitScore], dates: &[NaiveDate]) -> Result<PseudoLabelSeries> {
    let knots = Knots::from_visits(visits)?;
    let spline = NaturalSpline::new(knots.days.clone(), knots.values.clone())?;
    let points = dates
        .iter()
        .map(|&d| {
            let x = knots.offset(d)?;
            Ok((d, knots.subscale.clamp(spline.eval(x))))
        })
        .collect::<Result<_>>()?;
    Ok(PseudoLabelSeries {
        subscale: knots.subscale,
        technique: Technique::Cubic,
        points,
    })
}
