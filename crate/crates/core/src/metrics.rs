use crate::error::{Error, Result};

/// Root mean squared error. Both slices must share a scale.
pub fn rmse(preds: &[f64], labels: &[f64]) -> Result<f64> {
    if preds.is_empty() || preds.len() != labels.len() {
        return Err(Error::contract(format!(
            "rmse needs equal non-zero lengths, got {} and {}",
            preds.len(),
            labels.len()
        )));
    }
    let mse = preds
        .iter()
        .zip(labels)
        .map(|(p, l)| (l - p) * (l - p))
        .sum::<f64>()
        / preds.len() as f64;
    Ok(mse.sqrt())
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
