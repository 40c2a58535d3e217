//! Feature assembly, train-span scaling and the train/test split.

use super::PipelineError;
use crate::arima::ArModel;
use crate::ts::{FeatureMatrix, OhlcvFrame, WindowedDataset};
use serde::{Deserialize, Serialize};

pub const FEATURE_NAMES: [&str; 8] = ["open", "high", "low", "close", "volume", "amount", "arima_fitted", "arima_residual"];
pub const CLOSE: usize = 3;
pub const ARIMA_FITTED: usize = 6;
pub const ARIMA_RESIDUAL: usize = 7;

/// The six bar fields plus the ARIMA one-step fit and its residual.
pub fn build_features(frame: &OhlcvFrame, model: &ArModel) -> Result<FeatureMatrix, PipelineError> {
    let (fitted, resid) = model.fitted_and_residuals(&frame.close()).map_err(PipelineError::Arima)?;
    let bars = frame.bars();
    let cols: [Vec<f64>; 6] = [
        bars.iter().map(|b| b.open).collect(),
        bars.iter().map(|b| b.high).collect(),
        bars.iter().map(|b| b.low).collect(),
        bars.iter().map(|b| b.close).collect(),
        bars.iter().map(|b| b.volume).collect(),
        bars.iter().map(|b| b.amount).collect(),
    ];
    let named = FEATURE_NAMES
        .iter()
        .map(|s| s.to_string())
        .zip(cols.into_iter().chain([fitted.into_values(), resid.into_values()]))
        .collect();
    Ok(FeatureMatrix::from_columns(named)?)
}

/// Per-column min-max scaling fitted on the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub columns: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormParams {
    /// Min and max of each column over rows `0..train_rows`.
    pub fn fit(features: &FeatureMatrix, train_rows: usize) -> Result<NormParams, PipelineError> {
        if train_rows == 0 || train_rows > features.rows() {
            return Err(PipelineError::SplitOutOfRange { split: train_rows, len: features.rows() });
        }
        let c = features.cols();
        let mut min = vec![f64::INFINITY; c];
        let mut max = vec![f64::NEG_INFINITY; c];
        for i in 0..train_rows {
            for (j, &v) in features.row(i).iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        for j in 0..c {
            if max[j] <= min[j] {
                return Err(PipelineError::ZeroRange(features.columns()[j].clone()));
            }
        }
        Ok(NormParams { columns: features.columns().to_vec(), min, max })
    }

    pub fn apply(&self, features: &FeatureMatrix) -> Result<FeatureMatrix, PipelineError> {
        if features.columns() != self.columns.as_slice() {
            return Err(PipelineError::InvalidConfig(format!(
                "feature columns {:?} differ from the scaler's {:?}",
                features.columns(),
                self.columns
            )));
        }
        let c = self.columns.len();
        let data = features
            .data()
            .iter()
            .enumerate()
            .map(|(k, &v)| self.scale(k % c, v))
            .collect();
        Ok(FeatureMatrix::new(self.columns.clone(), features.rows(), data)?)
    }

    /// Values outside the training range map outside `[0, 1]`.
    pub fn scale(&self, column: usize, v: f64) -> f64 {
        (v - self.min[column]) / (self.max[column] - self.min[column])
    }

    pub fn unscale(&self, column: usize, v: f64) -> f64 {
        self.min[column] + v * (self.max[column] - self.min[column])
    }

    pub fn inverse(&self, scaled: &FeatureMatrix) -> Result<FeatureMatrix, PipelineError> {
        let c = self.columns.len();
        let data = scaled.data().iter().enumerate().map(|(k, &v)| self.unscale(k % c, v)).collect();
        Ok(FeatureMatrix::new(self.columns.clone(), scaled.rows(), data)?)
    }
}

/// Scales every row with min/max taken from rows `0..train_rows`.
pub fn normalize(features: &FeatureMatrix, train_rows: usize) -> Result<(FeatureMatrix, NormParams), PipelineError> {
    let p = NormParams::fit(features, train_rows)?;
    Ok((p.apply(features)?, p))
}

/// Samples whose target row lies before `split` train; the rest test. Both
/// sides keep their order.
pub fn split_train_test(data: &WindowedDataset, split: usize) -> Result<(WindowedDataset, WindowedDataset), PipelineError> {
    let idx = data.target_index();
    let n_train = idx.iter().take_while(|&&t| t < split).count();
    if n_train == 0 || n_train == data.len() {
        return Err(PipelineError::SplitOutOfRange { split, len: idx.last().map_or(0, |t| t + 1) });
    }
    Ok((data.subset(0..n_train), data.subset(n_train..data.len())))
}
