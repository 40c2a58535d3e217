use super::{PipelineConfig, PipelineError, Variant};
use crate::io::write_ohlcv;
use crate::metrics::Metrics;
use crate::ts::OhlcvFrame;
use chrono::NaiveDate;
use sha2::{Digest, Sha256};
use std::fmt::Write;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub date: NaiveDate,
    pub truth: f64,
    pub prediction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub variant: Variant,
    pub seed: u64,
    /// SHA-256 of the frame written in the canonical CSV layout.
    pub data_sha256: String,
    pub rows: usize,
    pub split_index: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub config: PipelineConfig,
    pub metrics: Metrics,
    pub loss_history: Vec<f64>,
    pub predictions: Vec<Prediction>,
    pub started: String,
    pub finished: String,
}

impl RunReport {
    /// `[run]`, `[config]`, `[metrics]` and `[loss]` sections of `key=value`
    /// lines. Timestamps are left out unless asked for, so two runs with the
    /// same seed give identical text.
    pub fn to_key_value(&self, with_timestamps: bool) -> String {
        let mut s = String::from("[run]\n");
        let _ = writeln!(s, "variant={}", self.variant);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "data_sha256={}", self.data_sha256);
        let _ = writeln!(s, "rows={}", self.rows);
        let _ = writeln!(s, "split_index={}", self.split_index);
        let _ = writeln!(s, "train_samples={}", self.train_samples);
        let _ = writeln!(s, "test_samples={}", self.test_samples);
        // How the ARIMA columns were produced: coefficients fit on the train
        // span, then one-step-ahead values using only earlier rows.
        s.push_str("arima_features=causal_one_step_train_fit\n");
        if with_timestamps {
            let _ = writeln!(s, "started={}", self.started);
            let _ = writeln!(s, "finished={}", self.finished);
        }
        s.push_str("\n[config]\n");
        s.push_str(&self.config.to_key_value());
        s.push_str("\n[metrics]\n");
        s.push_str(&self.metrics.to_key_value());
        s.push_str("\n[loss]\n");
        for (i, l) in self.loss_history.iter().enumerate() {
            let _ = writeln!(s, "epoch_{}={l}", i + 1);
        }
        s
    }

    /// `date,truth,prediction` rows for the test span.
    pub fn predictions_csv(&self) -> String {
        predictions_csv(&self.predictions)
    }

    /// `epoch,loss` rows.
    pub fn loss_csv(&self) -> String {
        let mut s = String::from("epoch,loss\n");
        for (i, l) in self.loss_history.iter().enumerate() {
            let _ = writeln!(s, "{},{l}", i + 1);
        }
        s
    }
}

pub fn predictions_csv(rows: &[Prediction]) -> String {
    let mut s = String::from("date,truth,prediction\n");
    for p in rows {
        let _ = writeln!(s, "{},{},{}", p.date.format("%Y%m%d"), p.truth, p.prediction);
    }
    s
}

/// One row per run: `variant,mse,rmse,mae,r2`.
pub fn ablation_table(reports: &[RunReport]) -> String {
    let mut s = String::from("variant,mse,rmse,mae,r2\n");
    for r in reports {
        let m = &r.metrics;
        let _ = writeln!(s, "{},{},{},{},{}", r.variant, m.mse, m.rmse, m.mae, m.r2_standard);
    }
    s
}

pub(crate) fn fingerprint(frame: &OhlcvFrame) -> Result<String, PipelineError> {
    let mut buf = Vec::new();
    write_ohlcv(frame, &mut buf)?;
    Ok(Sha256::digest(&buf).iter().map(|b| format!("{b:02x}")).collect())
}

pub(crate) fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339()
}
