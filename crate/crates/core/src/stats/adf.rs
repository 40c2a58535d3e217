use super::{mackinnon, StatsError};
use crate::linalg::{ols, OlsFit};
use crate::ts::Series;

/// Result of the augmented Dickey–Fuller test (constant, no trend).
#[derive(Debug, Clone, PartialEq)]
pub struct AdfReport {
    pub test_statistic: f64,
    pub p_value: f64,
    pub lags_used: usize,
    pub n_obs: usize,
    /// Critical values at the 1%, 5% and 10% levels.
    pub critical_values: [f64; 3],
    /// AIC of the selected lag on the common lag-selection sample.
    pub ic_best: f64,
}

impl AdfReport {
    /// Flat `key=value` block, one entry per line.
    pub fn to_key_value(&self) -> String {
        format!(
            "test_statistic={}\np_value={:e}\nlags_used={}\nn_obs={}\ncritical_value_1%={}\ncritical_value_5%={}\ncritical_value_10%={}\n",
            self.test_statistic,
            self.p_value,
            self.lags_used,
            self.n_obs,
            self.critical_values[0],
            self.critical_values[1],
            self.critical_values[2],
        )
    }
}

/// Schwert's rule, `floor(12·(n/100)^{1/4})`.
pub fn schwert_max_lag(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

/// Regresses Δy_j on [1, y_j, Δy_{j-1}..Δy_{j-lags}] for j in `start..dy.len()`.
fn adf_regression(y: &[f64], dy: &[f64], lags: usize, start: usize) -> Option<OlsFit> {
    let k = 2 + lags;
    let rows = dy.len() - start;
    let mut design = Vec::with_capacity(rows * k);
    for j in start..dy.len() {
        design.push(1.0);
        design.push(y[j]);
        design.extend((1..=lags).map(|i| dy[j - i]));
    }
    ols(&design, rows, k, &dy[start..])
}

/// Augmented Dickey–Fuller unit-root test with a constant term.
///
/// The lag order is chosen by minimum AIC over `0..=max_lag`, every
/// candidate fitted on the common sample that drops the first `max_lag`
/// differences; the chosen order is then refitted on all available rows.
/// `max_lag` defaults to Schwert's rule, capped at `n/2 - 2`.
pub fn adf_test(series: &Series, max_lag: Option<usize>) -> Result<AdfReport, StatsError> {
    let y = series.values();
    let n = y.len();
    if n < 20 {
        return Err(StatsError::SeriesTooShort { needed: 20, got: n });
    }
    let cap = n / 2 - 2;
    let max_lag = match max_lag {
        Some(m) if m > cap => return Err(StatsError::MaxLagTooLarge { max_lag: m, n }),
        Some(m) => m,
        None => schwert_max_lag(n).min(cap),
    };
    let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();

    let mut best: Option<(f64, usize)> = None;
    for lags in 0..=max_lag {
        let fit = adf_regression(y, &dy, lags, max_lag).ok_or(StatsError::SingularRegression)?;
        let aic = fit.aic();
        if best.is_none_or(|(b, _)| aic < b) {
            best = Some((aic, lags));
        }
    }
    let (ic_best, lags_used) = best.expect("at least one candidate lag");
    let fit = adf_regression(y, &dy, lags_used, lags_used).ok_or(StatsError::SingularRegression)?;
    if fit.std_err[1] == 0.0 {
        return Err(StatsError::SingularRegression);
    }
    let test_statistic = fit.coef[1] / fit.std_err[1];
    let n_obs = fit.nobs;
    Ok(AdfReport {
        test_statistic,
        p_value: mackinnon::p_value(test_statistic),
        lags_used,
        n_obs,
        critical_values: mackinnon::critical_values(n_obs),
        ic_best,
    })
}
