use crate::error::{Error, Result};

fn check_pair(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(Error::Shape(format!("{} observed vs {} predicted values", y.len(), yhat.len())));
    }
    if y.is_empty() {
        return Err(Error::Empty("metric input"));
    }
    Ok(())
}

/// Mean squared error `(1/n)·Σ(y - ŷ)²`.
pub fn mse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64)
}

/// Mean absolute percentage error `(100/n)·Σ|y - ŷ|/|y|`, in percent.
pub fn mape(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    if let Some(i) = y.iter().position(|&v| v == 0.0) {
        return Err(Error::UndefinedMape(i));
    }
    Ok(100.0 * y.iter().zip(yhat).map(|(a, b)| ((a - b) / a).abs()).sum::<f64>() / y.len() as f64)
}

/// Sample Pearson correlation coefficient.
pub fn pearson(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    if y.len() < 2 {
        return Err(Error::Empty("pearson needs at least two points"));
    }
    let n = y.len() as f64;
    let my = y.iter().sum::<f64>() / n;
    let mh = yhat.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in y.iter().zip(yhat) {
        let (da, db) = (a - my, b - mh);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}
