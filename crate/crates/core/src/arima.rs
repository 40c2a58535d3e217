//! ARIMA(p, d, 0): autoregression on the d-times differenced series,
//! estimated by conditional least squares.

use crate::linalg::ols;
use crate::ts::Series;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArimaError {
    #[error("series too short: need at least {needed} observations, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("singular AR design matrix")]
    SingularDesignMatrix,
    #[error("moving-average order q={0} is not supported (only q=0)")]
    UnsupportedMaOrder(usize),
    #[error("horizon must be positive")]
    ZeroHorizon,
    #[error("forecast diverged to a non-finite value")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ArimaSpec {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaSpec {
    pub fn new(p: usize, d: usize, q: usize) -> Result<Self, ArimaError> {
        if q != 0 {
            return Err(ArimaError::UnsupportedMaOrder(q));
        }
        Ok(ArimaSpec { p, d, q })
    }
}

impl Default for ArimaSpec {
    fn default() -> Self {
        ArimaSpec { p: 2, d: 1, q: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ArModel {
    pub spec: ArimaSpec,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub residual_variance: f64,
    /// Last `p + d` training values, enough to continue the recursion.
    pub training_anchor: Vec<f64>,
}

fn differenced(values: &[f64], d: usize) -> Vec<f64> {
    let mut v = values.to_vec();
    for _ in 0..d {
        v = v.windows(2).map(|w| w[1] - w[0]).collect();
    }
    v
}

/// `s_t - ∇^d s_t` as a function of `s_{t-1}..s_{t-d}`: coefficients of the
/// lagged levels, lag 1 first.
fn integration_weights(d: usize) -> Vec<f64> {
    let mut binom = vec![1.0_f64];
    for _ in 0..d {
        let mut next = vec![1.0; binom.len() + 1];
        for k in 1..binom.len() {
            next[k] = binom[k - 1] + binom[k];
        }
        binom = next;
    }
    // ∇^d s_t = Σ_k C(d,k)(-1)^k s_{t-k}, so s_t - ∇^d s_t = -Σ_{k≥1} C(d,k)(-1)^k s_{t-k}.
    (1..=d)
        .map(|k| if k % 2 == 1 { binom[k] } else { -binom[k] })
        .collect()
}

impl ArModel {
    fn predict_diff(&self, lags: &[f64]) -> f64 {
        // `lags` ends at x_{t-1}.
        let n = lags.len();
        self.intercept
            + self.coefficients.iter().enumerate().map(|(i, a)| a * lags[n - 1 - i]).sum::<f64>()
    }

    fn warm_up(&self) -> usize {
        self.spec.p + self.spec.d
    }

    /// One-step-ahead in-sample predictions on the level scale. Each value
    /// uses only earlier observations; the first `p + d` positions are
    /// padded with `fitted = actual`.
    pub fn fitted_and_residuals(&self, series: &Series) -> Result<(Series, Series), ArimaError> {
        let s = series.values();
        let (p, d) = (self.spec.p, self.spec.d);
        let warm = self.warm_up();
        if s.len() <= warm {
            return Err(ArimaError::SeriesTooShort { needed: warm + 1, got: s.len() });
        }
        let x = differenced(s, d);
        let w = integration_weights(d);
        let mut fitted = s.to_vec();
        for t in warm..s.len() {
            let j = t - d;
            let xhat = self.predict_diff(&x[j - p..j]);
            let base: f64 = w.iter().enumerate().map(|(k, c)| c * s[t - 1 - k]).sum();
            fitted[t] = base + xhat;
        }
        let mut residuals: Vec<f64> = s.iter().zip(&fitted).map(|(a, f)| a - f).collect();
        residuals[..warm].iter_mut().for_each(|r| *r = 0.0);
        Ok((series.same_index(fitted), series.same_index(residuals)))
    }

    /// Iterates the AR recursion `horizon` steps past `history` with the
    /// noise at its expectation, re-integrating `d` times.
    pub fn forecast(&self, history: &Series, horizon: usize) -> Result<Series, ArimaError> {
        self.forecast_values(history.values(), horizon)
            .and_then(|v| Series::new(v).map_err(|_| ArimaError::NonFinite))
    }

    fn forecast_values(&self, history: &[f64], horizon: usize) -> Result<Vec<f64>, ArimaError> {
        if horizon == 0 {
            return Err(ArimaError::ZeroHorizon);
        }
        let (p, d) = (self.spec.p, self.spec.d);
        let needed = (p + d).max(d).max(1);
        if history.len() < needed {
            return Err(ArimaError::SeriesTooShort { needed, got: history.len() });
        }
        let mut s = history.to_vec();
        let mut x = differenced(&s, d);
        let w = integration_weights(d);
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let xhat = self.predict_diff(&x[x.len() - p..]);
            let n = s.len();
            let base: f64 = w.iter().enumerate().map(|(k, c)| c * s[n - 1 - k]).sum();
            let next = base + xhat;
            s.push(next);
            x.push(xhat);
            out.push(next);
        }
        Ok(out)
    }

    /// Continues from the stored training anchor.
    pub fn forecast_from_anchor(&self, horizon: usize) -> Result<Series, ArimaError> {
        self.forecast_values(&self.training_anchor, horizon)
            .and_then(|v| Series::new(v).map_err(|_| ArimaError::NonFinite))
    }

    /// Rolling one-step forecasts for positions `from..len`, each using the
    /// observed values before it and the fixed fitted coefficients.
    pub fn rolling_one_step(&self, series: &Series, from: usize) -> Result<Vec<f64>, ArimaError> {
        let (fitted, _) = self.fitted_and_residuals(series)?;
        let warm = self.warm_up();
        if from < warm {
            return Err(ArimaError::SeriesTooShort { needed: warm, got: from });
        }
        Ok(fitted.values()[from..].to_vec())
    }
}

/// Fits ARIMA(p, d, 0) by ordinary least squares of `x_t` on
/// `1, x_{t-1}..x_{t-p}` where `x` is the d-times differenced series.
pub fn fit(series: &Series, spec: ArimaSpec) -> Result<ArModel, ArimaError> {
    if spec.q != 0 {
        return Err(ArimaError::UnsupportedMaOrder(spec.q));
    }
    let s = series.values();
    let needed = spec.p + spec.d + 11;
    if s.len() < needed {
        return Err(ArimaError::SeriesTooShort { needed, got: s.len() });
    }
    let x = differenced(s, spec.d);
    let p = spec.p;
    let rows = x.len() - p;
    let y = &x[p..];
    let anchor = s[s.len() - (p + spec.d)..].to_vec();

    let first = y[0];
    if x.iter().all(|&v| v == first) {
        // Constant differences: the intercept carries everything.
        return Ok(ArModel {
            spec,
            intercept: first,
            coefficients: vec![0.0; p],
            residual_variance: 0.0,
            training_anchor: anchor,
        });
    }

    let k = p + 1;
    let mut design = Vec::with_capacity(rows * k);
    for t in p..x.len() {
        design.push(1.0);
        design.extend((1..=p).map(|i| x[t - i]));
    }
    let fit = ols(&design, rows, k, y).ok_or(ArimaError::SingularDesignMatrix)?;
    Ok(ArModel {
        spec,
        intercept: fit.coef[0],
        coefficients: fit.coef[1..].to_vec(),
        residual_variance: fit.ssr / rows as f64,
        training_anchor: anchor,
    })
}
