use crate::error::{Error, Result};

/// Sample variance below which a vector counts as constant for correlation.
pub const CONSTANT_VARIANCE: f64 = 1e-24;

fn check_pair(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::InvalidInput("metric on empty vectors".into()));
    }
    if y.len() != yhat.len() {
        return Err(Error::Dimension {
            expected: y.len(),
            got: yhat.len(),
        });
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    let sse: f64 = y.iter().zip(yhat).map(|(a, b)| (b - a) * (b - a)).sum();
    Ok((sse / y.len() as f64).sqrt())
}

/// Product-moment correlation; 0 when either side is constant.
pub fn pearson(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    let n = y.len();
    if n < 2 {
        return Ok(0.0);
    }
    let (my, mp) = (mean(y), mean(yhat));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in y.iter().zip(yhat) {
        let (da, db) = (a - my, b - mp);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    let denom = (n - 1) as f64;
    if sxx / denom < CONSTANT_VARIANCE || syy / denom < CONSTANT_VARIANCE {
        return Ok(0.0);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Standard deviation with the `n - 1` denominator; 0 for a single value.
pub fn sample_sd(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::InvalidInput("standard deviation of an empty vector".into()));
    }
    if v.len() == 1 {
        return Ok(0.0);
    }
    let m = mean(v);
    let ss: f64 = v.iter().map(|x| (x - m) * (x - m)).sum();
    Ok((ss / (v.len() - 1) as f64).sqrt())
}

/// RMS difference after removing each mean, `n - 1` normalised to match
/// [`sample_sd`].
pub fn centered_rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    if y.len() == 1 {
        return Ok(0.0);
    }
    let (my, mp) = (mean(y), mean(yhat));
    let ss: f64 = y
        .iter()
        .zip(yhat)
        .map(|(a, b)| ((b - mp) - (a - my)).powi(2))
        .sum();
    Ok((ss / (y.len() - 1) as f64).sqrt())
}
