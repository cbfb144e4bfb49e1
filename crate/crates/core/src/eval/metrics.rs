use crate::{Error, Result};

fn check(pairs: &[(f64, f64)]) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::Argument("error metric over an empty prediction list".into()));
    }
    Ok(())
}

/// Root mean squared error over `(predicted, actual)` pairs.
pub fn rmse(pairs: &[(f64, f64)]) -> Result<f64> {
    check(pairs)?;
    let sse: f64 = pairs.iter().map(|(p, a)| (p - a) * (p - a)).sum();
    Ok((sse / pairs.len() as f64).sqrt())
}

/// Mean absolute error over `(predicted, actual)` pairs.
pub fn mae(pairs: &[(f64, f64)]) -> Result<f64> {
    check(pairs)?;
    let sae: f64 = pairs.iter().map(|(p, a)| (p - a).abs()).sum();
    Ok(sae / pairs.len() as f64)
}

/// Relative error reduction in percent; negative when the model is worse.
pub fn improvement_pct(baseline_metric: f64, model_metric: f64) -> Result<f64> {
    if baseline_metric.is_nan() || baseline_metric <= 0.0 {
        return Err(Error::Argument(format!(
            "baseline metric must be positive, got {baseline_metric}"
        )));
    }
    Ok(100.0 * (baseline_metric - model_metric) / baseline_metric)
}
