use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mae: f64,
    /// Absent when any target is 0.
    pub mape: Option<f64>,
    pub rmse: f64,
    pub r2: f64,
    pub n: usize,
}

/// MAE, MAPE, RMSE and R² of predictions against targets.
///
/// R² is `1 - SSE/SST`; when the targets are constant (SST = 0) it is
/// reported as 0.
pub fn regression_metrics(y: &[f64], y_hat: &[f64]) -> Result<MetricsReport> {
    if y.len() != y_hat.len() {
        return Err(Error::InvalidArgument(format!(
            "{} targets but {} predictions",
            y.len(),
            y_hat.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::InvalidArgument("metrics of an empty sample".into()));
    }
    let n = y.len() as f64;
    let mean_y = y.iter().sum::<f64>() / n;
    let (mut abs, mut sq, mut sst, mut pct) = (0.0, 0.0, 0.0, 0.0);
    let mut has_zero = false;
    for (&t, &p) in y.iter().zip(y_hat) {
        let e = t - p;
        abs += e.abs();
        sq += e * e;
        sst += (t - mean_y) * (t - mean_y);
        if t == 0.0 {
            has_zero = true;
        } else {
            pct += (e / t).abs();
        }
    }
    if has_zero {
        log::warn!("MAPE omitted: targets contain 0");
    }
    Ok(MetricsReport {
        mae: abs / n,
        mape: (!has_zero).then(|| pct / n),
        rmse: (sq / n).sqrt(),
        r2: if sst == 0.0 { 0.0 } else { 1.0 - sq / sst },
        n: y.len(),
    })
}
