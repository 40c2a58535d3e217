//! Stationarity diagnostics: differencing, the augmented Dickey–Fuller
//! test, and sample ACF/PACF.

mod adf;
pub mod mackinnon;

pub use adf::{adf_test, AdfReport};

use crate::ts::Series;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("series too short: need at least {needed} observations, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("singular regression design (collinear lags)")]
    SingularRegression,
    #[error("max_lag {max_lag} too large for {n} observations")]
    MaxLagTooLarge { max_lag: usize, n: usize },
}

/// `order` successive first differences, `x_k = s_k - s_{k-1}`.
pub fn difference(series: &Series, order: usize) -> Result<Series, StatsError> {
    if series.len() <= order {
        return Err(StatsError::SeriesTooShort { needed: order + 1, got: series.len() });
    }
    let mut v = series.values().to_vec();
    for _ in 0..order {
        v = v.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(series.tail(v.len()).same_index(v))
}

fn demeaned_sum_sq(x: &[f64]) -> (Vec<f64>, f64) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let d: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let ss = d.iter().map(|v| v * v).sum();
    (d, ss)
}

/// Biased (1/N) sample autocorrelations for lags `0..=n_lags`.
pub fn acf(series: &Series, n_lags: usize) -> Result<Vec<f64>, StatsError> {
    let x = series.values();
    if n_lags >= x.len() {
        return Err(StatsError::SeriesTooShort { needed: n_lags + 1, got: x.len() });
    }
    let (d, ss) = demeaned_sum_sq(x);
    if ss == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((0..=n_lags)
        .map(|k| {
            if k == 0 {
                1.0
            } else {
                d.iter().zip(&d[k..]).map(|(a, b)| a * b).sum::<f64>() / ss
            }
        })
        .collect())
}

/// Partial autocorrelations for lags `0..=n_lags` via the Durbin–Levinson
/// recursion on the biased sample ACF.
pub fn pacf(series: &Series, n_lags: usize) -> Result<Vec<f64>, StatsError> {
    if 2 * n_lags >= series.len() {
        return Err(StatsError::SeriesTooShort { needed: 2 * n_lags + 1, got: series.len() });
    }
    let r = acf(series, n_lags)?;
    let mut out = vec![1.0];
    let mut phi: Vec<f64> = Vec::with_capacity(n_lags);
    for k in 1..=n_lags {
        let num = r[k] - (1..k).map(|j| phi[j - 1] * r[k - j]).sum::<f64>();
        let den = 1.0 - (1..k).map(|j| phi[j - 1] * r[j]).sum::<f64>();
        let kk = if den.abs() < f64::EPSILON { 0.0 } else { num / den };
        let prev = phi.clone();
        for j in 1..k {
            phi[j - 1] = prev[j - 1] - kk * prev[k - j - 1];
        }
        phi.push(kk);
        out.push(kk);
    }
    Ok(out)
}
