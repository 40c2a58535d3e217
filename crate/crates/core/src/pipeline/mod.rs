//! End-to-end runs: ARIMA channels → scaling → windows → network
//! pretraining → boosted-tree fine-tuning → test-span metrics.

pub mod checkpoint;
mod config;
mod features;
mod report;

pub use config::{Architecture, FineTuneInput, PipelineConfig, SplitPoint, TargetMode, Variant};
pub use features::{build_features, normalize, split_train_test, NormParams, FEATURE_NAMES};
pub use report::{ablation_table, predictions_csv, Prediction, RunReport};

use crate::arima::{self, ArModel, ArimaError};
use crate::gbt::{self, GbtEnsemble, GbtError};
use crate::io::IoError;
use crate::metrics::{evaluate, MetricsError};
use crate::nn::{train::train_with, NnError, Seq2SeqModel};
use crate::ts::{FeatureMatrix, OhlcvFrame, Series, TsError, WindowedDataset};
use features::{ARIMA_RESIDUAL, CLOSE};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("arima stage: {0}")]
    Arima(ArimaError),
    #[error("pretraining stage: {0}")]
    Nn(NnError),
    #[error("fine-tuning stage: {0}")]
    Gbt(GbtError),
    #[error("feature stage: {0}")]
    Ts(#[from] TsError),
    #[error("evaluation stage: {0}")]
    Metrics(MetricsError),
    #[error("io: {0}")]
    Io(#[from] IoError),
    #[error("split at row {split} leaves an empty side (series of {len} rows)")]
    SplitOutOfRange { split: usize, len: usize },
    #[error("column `{0}` is constant over the training span")]
    ZeroRange(String),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Everything needed to predict on new data: the fitted ARIMA, the scaler
/// and the trained network and/or trees.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPipeline {
    pub config: PipelineConfig,
    pub split_index: usize,
    pub arima: ArModel,
    pub norm: NormParams,
    pub model: Option<Seq2SeqModel>,
    pub gbt: Option<GbtEnsemble>,
}

/// Scaled features and windows over a whole frame.
struct Prepared {
    fitted: Vec<f64>,
    close: Vec<f64>,
    windows: WindowedDataset,
}

/// Resolves `split` to the first test row.
pub fn split_index(split: SplitPoint, frame: &OhlcvFrame) -> Result<usize, PipelineError> {
    let n = frame.len();
    let i = match split {
        SplitPoint::Index(i) => i,
        SplitPoint::Date(d) => frame.index_of_date(d).unwrap_or(n),
        SplitPoint::Fraction(f) => (n as f64 * f).round() as usize,
    };
    if i == 0 || i >= n {
        return Err(PipelineError::SplitOutOfRange { split: i, len: n });
    }
    Ok(i)
}

impl TrainedPipeline {
    fn prepare(&self, frame: &OhlcvFrame) -> Result<Prepared, PipelineError> {
        let raw = build_features(frame, &self.arima)?;
        let scaled = self.norm.apply(&raw)?;
        let target_col = match self.config.target {
            TargetMode::Close => CLOSE,
            TargetMode::Residual => ARIMA_RESIDUAL,
        };
        let windows = WindowedDataset::build(&scaled, &scaled.column(target_col), self.config.train.lookback)?;
        Ok(Prepared { fitted: raw.column(features::ARIMA_FITTED), close: raw.column(CLOSE), windows })
    }

    /// Maps a scaled model output for target row `t` back to a price.
    fn unscale(&self, v: f64, t: usize, fitted: &[f64]) -> f64 {
        match self.config.target {
            TargetMode::Close => self.norm.unscale(CLOSE, v),
            TargetMode::Residual => self.norm.unscale(ARIMA_RESIDUAL, v) + fitted[t],
        }
    }

    /// Inputs for the trees: flattened windows, decoder features, or the
    /// network prediction with the window's last row.
    fn gbt_inputs(&self, data: &WindowedDataset) -> Result<FeatureMatrix, PipelineError> {
        let rows: Vec<Vec<f64>> = match &self.model {
            None => (0..data.len()).map(|k| data.input(k).to_vec()).collect(),
            Some(m) => {
                let (pred, feats) = m.infer(data).map_err(PipelineError::Nn)?;
                match self.config.finetune_input {
                    FineTuneInput::DecoderFeatures => feats,
                    FineTuneInput::PredictionAndLastRow => {
                        let f = data.features();
                        (0..data.len())
                            .map(|k| {
                                let w = data.input(k);
                                std::iter::once(pred[k]).chain(w[w.len() - f..].iter().copied()).collect()
                            })
                            .collect()
                    }
                }
            }
        };
        Ok(FeatureMatrix::from_rows(&rows)?)
    }

    fn predict_prepared(&self, data: &WindowedDataset, fitted: &[f64]) -> Result<Vec<f64>, PipelineError> {
        let idx = data.target_index();
        if self.config.variant == Variant::ArimaOnly {
            return Ok(idx.iter().map(|&t| fitted[t]).collect());
        }
        let scaled = match (&self.gbt, &self.model) {
            (Some(g), _) => g.predict(&self.gbt_inputs(data)?).map_err(PipelineError::Gbt)?,
            (None, Some(m)) => m.predict(data).map_err(PipelineError::Nn)?,
            (None, None) => return Err(PipelineError::Checkpoint(format!("{} has no trained model", self.config.variant))),
        };
        Ok(scaled.iter().zip(idx).map(|(&v, &t)| self.unscale(v, t, fitted)).collect())
    }

    /// One-step predictions for every row that has a full look-back window.
    pub fn predict(&self, frame: &OhlcvFrame) -> Result<Vec<Prediction>, PipelineError> {
        let prep = self.prepare(frame)?;
        let preds = self.predict_prepared(&prep.windows, &prep.fitted)?;
        let dates = frame.dates();
        Ok(prep
            .windows
            .target_index()
            .iter()
            .zip(preds)
            .map(|(&t, p)| Prediction { date: dates[t], truth: prep.close[t], prediction: p })
            .collect())
    }
}

/// Result of a single-variant run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub trained: TrainedPipeline,
}

/// Fits every stage of `config.variant` on the training span of `frame` and
/// scores one-step predictions on the test span.
pub fn run(config: &PipelineConfig, frame: &OhlcvFrame) -> Result<RunOutput, PipelineError> {
    run_with(config, frame, |_, _| {})
}

/// [`run`] with a per-epoch `(epoch, loss)` callback for the network stage.
pub fn run_with(
    config: &PipelineConfig,
    frame: &OhlcvFrame,
    on_epoch: impl FnMut(usize, f64),
) -> Result<RunOutput, PipelineError> {
    let started = report::timestamp();
    config.validate()?;
    let split = split_index(config.split, frame)?;
    if split <= config.train.lookback {
        return Err(PipelineError::SplitOutOfRange { split, len: frame.len() });
    }
    let close = frame.close().into_values();
    let arima = arima::fit(&Series::new(close[..split].to_vec())?, config.arima).map_err(PipelineError::Arima)?;
    let raw = build_features(frame, &arima)?;
    let norm = NormParams::fit(&raw, split)?;
    let mut trained = TrainedPipeline { config: config.clone(), split_index: split, arima, norm, model: None, gbt: None };
    let prep = trained.prepare(frame)?;
    let (train, test) = split_train_test(&prep.windows, split)?;

    let mut loss_history = Vec::new();
    let variant = config.variant;
    if let Some(mc) = variant.model_config(&config.arch, config.train.lookback, FEATURE_NAMES.len(), config.train.heads) {
        let mut model = Seq2SeqModel::new(mc, config.seed).map_err(PipelineError::Nn)?;
        let tc = crate::nn::TrainConfig { seed: config.seed, ..config.train.clone() };
        loss_history = train_with(&mut model, &train, &tc, on_epoch).map_err(PipelineError::Nn)?;
        trained.model = Some(model);
    }
    if variant.uses_gbt() {
        let x = trained.gbt_inputs(&train)?;
        trained.gbt = Some(gbt::fit(&x, train.targets(), &config.gbt).map_err(PipelineError::Gbt)?);
    }

    let pred = trained.predict_prepared(&test, &prep.fitted)?;
    let truth: Vec<f64> = test.target_index().iter().map(|&t| prep.close[t]).collect();
    let metrics = evaluate(&pred, &truth).map_err(PipelineError::Metrics)?;
    let dates = frame.dates();
    let predictions = test
        .target_index()
        .iter()
        .zip(pred.iter().zip(&truth))
        .map(|(&t, (&p, &y))| Prediction { date: dates[t], truth: y, prediction: p })
        .collect();
    let report = RunReport {
        variant,
        seed: config.seed,
        data_sha256: report::fingerprint(frame)?,
        rows: frame.len(),
        split_index: split,
        train_samples: train.len(),
        test_samples: test.len(),
        config: config.clone(),
        metrics,
        loss_history,
        predictions,
        started,
        finished: report::timestamp(),
    };
    Ok(RunOutput { report, trained })
}

/// Runs every variant on the same data; variant `i` uses seed `seed + i`.
pub fn ablate(config: &PipelineConfig, frame: &OhlcvFrame) -> Result<Vec<RunReport>, PipelineError> {
    Variant::ALL
        .iter()
        .map(|&v| {
            let c = PipelineConfig { variant: v, seed: config.seed + v.index() as u64, ..config.clone() };
            run(&c, frame).map(|o| o.report)
        })
        .collect()
}
