//! Forecast error metrics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("prediction has {pred} values, truth has {truth}")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("need at least 2 values, got {0}")]
    TooShort(usize),
    #[error("truth is zero at index {0}; MAPE undefined")]
    ZeroTruthValue(usize),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
}

/// `r2_standard` is `1 - SS_res/SS_tot`. `r2_explained` is the ratio of
/// explained to total variation, `Σ(ŷ-ȳ)²/Σ(y-ȳ)²`, with `ȳ` the truth mean;
/// the two agree only for least-squares fits with an intercept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub rmse: f64,
    /// Fraction, not percent.
    pub mape: f64,
    pub mse: f64,
    pub r2_standard: f64,
    pub r2_explained: f64,
}

impl Metrics {
    pub const KEYS: [&'static str; 6] = ["mae", "rmse", "mape", "mse", "r2_standard", "r2_explained"];

    pub fn values(&self) -> [f64; 6] {
        [self.mae, self.rmse, self.mape, self.mse, self.r2_standard, self.r2_explained]
    }

    pub fn to_key_value(&self) -> String {
        Self::KEYS.iter().zip(self.values()).map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

pub fn evaluate(pred: &[f64], truth: &[f64]) -> Result<Metrics, MetricsError> {
    if pred.len() != truth.len() {
        return Err(MetricsError::LengthMismatch { pred: pred.len(), truth: truth.len() });
    }
    let n = truth.len();
    if n < 2 {
        return Err(MetricsError::TooShort(n));
    }
    for i in 0..n {
        if !pred[i].is_finite() || !truth[i].is_finite() {
            return Err(MetricsError::NonFinite(i));
        }
        if truth[i] == 0.0 {
            return Err(MetricsError::ZeroTruthValue(i));
        }
    }
    let nf = n as f64;
    let mean = truth.iter().sum::<f64>() / nf;
    let (mut abs, mut sq, mut pct, mut ss_tot, mut ss_exp) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&p, &y) in pred.iter().zip(truth) {
        let e = p - y;
        abs += e.abs();
        sq += e * e;
        pct += (e / y).abs();
        ss_tot += (y - mean) * (y - mean);
        ss_exp += (p - mean) * (p - mean);
    }
    let mse = sq / nf;
    let (r2_standard, r2_explained) = if ss_tot == 0.0 {
        // Constant truth: perfect iff there is no error.
        (if sq == 0.0 { 1.0 } else { f64::NEG_INFINITY }, if ss_exp == 0.0 { 1.0 } else { f64::INFINITY })
    } else {
        (1.0 - sq / ss_tot, ss_exp / ss_tot)
    };
    Ok(Metrics { mae: abs / nf, rmse: mse.sqrt(), mape: pct / nf, mse, r2_standard, r2_explained })
}
