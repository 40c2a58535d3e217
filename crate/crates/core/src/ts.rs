//! Core time-series and dataset types: daily bars, value series, feature
//! matrices and look-back windows.

use chrono::NaiveDate;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TsError {
    #[error("empty input")]
    EmptyInput,
    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),
    #[error("invalid bar at index {index}: {reason}")]
    InvalidBar { index: usize, reason: String },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("date index must be strictly increasing (index {0})")]
    UnorderedDates(usize),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("look-back {lookback} needs more than {lookback} observations, got {len}")]
    WindowTooLong { lookback: usize, len: usize },
}

/// One daily bar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OhlcvBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
    pub amount: f64,
}

impl OhlcvBar {
    fn check(&self) -> Result<(), String> {
        let prices = [
            ("open", self.open),
            ("high", self.high),
            ("low", self.low),
            ("close", self.close),
        ];
        for (name, v) in prices {
            if !v.is_finite() || v <= 0.0 {
                return Err(format!("{name} must be finite and positive, got {v}"));
            }
        }
        if !self.volume.is_finite() || self.volume < 0.0 {
            return Err(format!("volume must be finite and >= 0, got {}", self.volume));
        }
        if !self.amount.is_finite() || self.amount < 0.0 {
            return Err(format!("amount must be finite and >= 0, got {}", self.amount));
        }
        if self.low > self.high {
            return Err(format!("low {} > high {}", self.low, self.high));
        }
        if self.low > self.open.min(self.close) {
            return Err(format!("low {} above min(open, close)", self.low));
        }
        if self.high < self.open.max(self.close) {
            return Err(format!("high {} below max(open, close)", self.high));
        }
        Ok(())
    }
}

/// Validated bars in strictly ascending date order.
#[derive(Debug, Clone, PartialEq)]
pub struct OhlcvFrame {
    bars: Vec<OhlcvBar>,
}

/// Sorts bars by date and enforces the per-bar invariants.
///
/// Missing trading days are not imputed: consecutive bars are consecutive
/// observations.
pub fn align_and_validate(mut bars: Vec<OhlcvBar>) -> Result<OhlcvFrame, TsError> {
    if bars.is_empty() {
        return Err(TsError::EmptyInput);
    }
    for (index, bar) in bars.iter().enumerate() {
        bar.check()
            .map_err(|reason| TsError::InvalidBar { index, reason })?;
    }
    bars.sort_by_key(|b| b.date);
    for w in bars.windows(2) {
        if w[0].date == w[1].date {
            return Err(TsError::DuplicateDate(w[0].date));
        }
    }
    Ok(OhlcvFrame { bars })
}

impl OhlcvFrame {
    pub fn bars(&self) -> &[OhlcvBar] {
        &self.bars
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.bars.iter().map(|b| b.date).collect()
    }

    /// Close prices with the frame's dates attached.
    pub fn close(&self) -> Series {
        Series {
            values: self.bars.iter().map(|b| b.close).collect(),
            dates: Some(self.dates()),
        }
    }

    /// Named column as a dated series. Accepts `open`, `high`, `low`,
    /// `close`, `volume`/`vol` and `amount`.
    pub fn column(&self, name: &str) -> Option<Series> {
        let pick: fn(&OhlcvBar) -> f64 = match name {
            "open" => |b| b.open,
            "high" => |b| b.high,
            "low" => |b| b.low,
            "close" => |b| b.close,
            "volume" | "vol" => |b| b.volume,
            "amount" => |b| b.amount,
            _ => return None,
        };
        Some(Series {
            values: self.bars.iter().map(pick).collect(),
            dates: Some(self.dates()),
        })
    }

    /// Replaces the close column, keeping the other fields. Used to rebuild a
    /// frame from an extracted close series.
    pub fn with_close(&self, close: &Series) -> Result<OhlcvFrame, TsError> {
        if close.len() != self.len() {
            return Err(TsError::LengthMismatch { expected: self.len(), got: close.len() });
        }
        let bars = self
            .bars
            .iter()
            .zip(close.values())
            .map(|(b, &c)| OhlcvBar { close: c, ..*b })
            .collect();
        align_and_validate(bars)
    }

    /// First index whose date is on or after `date`.
    pub fn index_of_date(&self, date: NaiveDate) -> Option<usize> {
        self.bars.iter().position(|b| b.date >= date)
    }
}

/// Ordered finite values, optionally with a strictly increasing date index.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    values: Vec<f64>,
    dates: Option<Vec<NaiveDate>>,
}

impl Series {
    pub fn new(values: Vec<f64>) -> Result<Series, TsError> {
        if values.is_empty() {
            return Err(TsError::EmptyInput);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(TsError::NonFinite(i));
        }
        Ok(Series { values, dates: None })
    }

    pub fn with_dates(values: Vec<f64>, dates: Vec<NaiveDate>) -> Result<Series, TsError> {
        let mut s = Series::new(values)?;
        if dates.len() != s.values.len() {
            return Err(TsError::LengthMismatch { expected: s.values.len(), got: dates.len() });
        }
        if let Some(i) = dates.windows(2).position(|w| w[0] >= w[1]) {
            return Err(TsError::UnorderedDates(i + 1));
        }
        s.dates = Some(dates);
        Ok(s)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dates(&self) -> Option<&[NaiveDate]> {
        self.dates.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Keeps the last `n` observations (dates follow).
    pub(crate) fn tail(&self, n: usize) -> Series {
        let start = self.values.len() - n;
        Series {
            values: self.values[start..].to_vec(),
            dates: self.dates.as_ref().map(|d| d[start..].to_vec()),
        }
    }

    /// Series sharing this one's date index, if lengths agree.
    pub(crate) fn same_index(&self, values: Vec<f64>) -> Series {
        let dates = self.dates.clone().filter(|d| d.len() == values.len());
        Series { values, dates }
    }
}

/// Row-major matrix of named feature channels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    columns: Vec<String>,
    rows: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(columns: Vec<String>, rows: usize, data: Vec<f64>) -> Result<Self, TsError> {
        if data.len() != rows * columns.len() {
            return Err(TsError::LengthMismatch { expected: rows * columns.len(), got: data.len() });
        }
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].contains(c) {
                return Err(TsError::DuplicateColumn(c.clone()));
            }
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(TsError::NonFinite(i));
        }
        Ok(FeatureMatrix { columns, rows, data })
    }

    /// Builds a matrix from equally long columns.
    pub fn from_columns(named: Vec<(String, Vec<f64>)>) -> Result<Self, TsError> {
        let rows = named.first().map_or(0, |(_, v)| v.len());
        let mut data = vec![0.0; rows * named.len()];
        let ncols = named.len();
        for (j, (_, col)) in named.iter().enumerate() {
            if col.len() != rows {
                return Err(TsError::LengthMismatch { expected: rows, got: col.len() });
            }
            for (i, &v) in col.iter().enumerate() {
                data[i * ncols + j] = v;
            }
        }
        let columns = named.into_iter().map(|(n, _)| n).collect();
        FeatureMatrix::new(columns, rows, data)
    }

    /// Unnamed columns `f0..f{cols-1}` from row vectors.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, TsError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(TsError::LengthMismatch { expected: cols, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        FeatureMatrix::new((0..cols).map(|j| format!("f{j}")).collect(), rows.len(), data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols() + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Look-back windows over a feature matrix with next-step targets.
///
/// Sample `k` holds rows `k..k+lookback` and the target at row
/// `k + lookback`; `target_index` records that row.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    lookback: usize,
    features: usize,
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    target_index: Vec<usize>,
}

impl WindowedDataset {
    /// Windows every `lookback` consecutive rows of `features`; `target[t]`
    /// is the value predicted from rows `t-lookback..t`.
    pub fn build(
        features: &FeatureMatrix,
        target: &[f64],
        lookback: usize,
    ) -> Result<WindowedDataset, TsError> {
        let n = features.rows();
        if target.len() != n {
            return Err(TsError::LengthMismatch { expected: n, got: target.len() });
        }
        if lookback == 0 || n <= lookback {
            return Err(TsError::WindowTooLong { lookback, len: n });
        }
        let f = features.cols();
        let mut inputs = Vec::with_capacity(n - lookback);
        let mut targets = Vec::with_capacity(n - lookback);
        let mut target_index = Vec::with_capacity(n - lookback);
        for t in lookback..n {
            inputs.push(features.data()[(t - lookback) * f..t * f].to_vec());
            targets.push(target[t]);
            target_index.push(t);
        }
        Ok(WindowedDataset { lookback, features: f, inputs, targets, target_index })
    }

    /// Windows over a single series: the window values predict the next one.
    pub fn from_series(series: &Series, lookback: usize) -> Result<WindowedDataset, TsError> {
        let fm = FeatureMatrix::new(vec!["value".into()], series.len(), series.values().to_vec())?;
        WindowedDataset::build(&fm, series.values(), lookback)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn lookback(&self) -> usize {
        self.lookback
    }

    pub fn features(&self) -> usize {
        self.features
    }

    /// Row-major `lookback × features` window.
    pub fn input(&self, k: usize) -> &[f64] {
        &self.inputs[k]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn target_index(&self) -> &[usize] {
        &self.target_index
    }

    /// Samples `range` as a new dataset (order preserved).
    pub fn subset(&self, range: std::ops::Range<usize>) -> WindowedDataset {
        WindowedDataset {
            lookback: self.lookback,
            features: self.features,
            inputs: self.inputs[range.clone()].to_vec(),
            targets: self.targets[range.clone()].to_vec(),
            target_index: self.target_index[range].to_vec(),
        }
    }

    /// Samples whose target row satisfies `keep`.
    pub fn filter_by_target_row(&self, keep: impl Fn(usize) -> bool) -> WindowedDataset {
        let idx: Vec<usize> = (0..self.len()).filter(|&k| keep(self.target_index[k])).collect();
        WindowedDataset {
            lookback: self.lookback,
            features: self.features,
            inputs: idx.iter().map(|&k| self.inputs[k].clone()).collect(),
            targets: idx.iter().map(|&k| self.targets[k]).collect(),
            target_index: idx.iter().map(|&k| self.target_index[k]).collect(),
        }
    }
}
