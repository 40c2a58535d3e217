//! Run configuration and its flat `section.key=value` text form.

use super::PipelineError;
use crate::arima::ArimaSpec;
use crate::gbt::GbtParams;
use crate::nn::{EncoderKind, ModelConfig, TrainConfig};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    ArimaOnly,
    XgbOnly,
    SlLstm,
    MlLstm,
    Bilstm,
    BilstmXgb,
    CnnBilstmXgb,
    AcnnBilstmXgb,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::ArimaOnly,
        Variant::XgbOnly,
        Variant::SlLstm,
        Variant::MlLstm,
        Variant::Bilstm,
        Variant::BilstmXgb,
        Variant::CnnBilstmXgb,
        Variant::AcnnBilstmXgb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::ArimaOnly => "arima_only",
            Variant::XgbOnly => "xgb_only",
            Variant::SlLstm => "sl_lstm",
            Variant::MlLstm => "ml_lstm",
            Variant::Bilstm => "bilstm",
            Variant::BilstmXgb => "bilstm_xgb",
            Variant::CnnBilstmXgb => "cnn_bilstm_xgb",
            Variant::AcnnBilstmXgb => "acnn_bilstm_xgb",
        }
    }

    pub fn index(self) -> usize {
        Variant::ALL.iter().position(|&v| v == self).expect("listed")
    }

    pub fn uses_network(self) -> bool {
        !matches!(self, Variant::ArimaOnly | Variant::XgbOnly)
    }

    pub fn uses_gbt(self) -> bool {
        matches!(self, Variant::XgbOnly | Variant::BilstmXgb | Variant::CnnBilstmXgb | Variant::AcnnBilstmXgb)
    }

    /// Network shape for this variant, or `None` when it has no network.
    pub fn model_config(self, arch: &Architecture, lookback: usize, features: usize, heads: usize) -> Option<ModelConfig> {
        let (encoder, layers, bidirectional) = match self {
            Variant::ArimaOnly | Variant::XgbOnly => return None,
            Variant::SlLstm => (EncoderKind::None, 1, false),
            Variant::MlLstm => (EncoderKind::None, arch.layers, false),
            Variant::Bilstm | Variant::BilstmXgb => (EncoderKind::None, arch.layers, true),
            Variant::CnnBilstmXgb => (EncoderKind::Conv, arch.layers, true),
            Variant::AcnnBilstmXgb => (EncoderKind::Attention, arch.layers, true),
        };
        Some(ModelConfig {
            lookback,
            features,
            encoder,
            d_model: arch.d_model,
            heads,
            kernels: arch.kernels.clone(),
            causal: arch.causal,
            hidden: arch.hidden,
            layers,
            bidirectional,
        })
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown variant `{s}`"))
    }
}

/// Where the test span starts. Rows before it form the training span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SplitPoint {
    Index(usize),
    /// First row on or after the date.
    Date(NaiveDate),
    /// `round(len · f)`.
    Fraction(f64),
}

impl fmt::Display for SplitPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitPoint::Index(i) => write!(f, "index:{i}"),
            SplitPoint::Date(d) => write!(f, "date:{}", d.format("%Y%m%d")),
            SplitPoint::Fraction(x) => write!(f, "fraction:{x}"),
        }
    }
}

impl FromStr for SplitPoint {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, v) = s.split_once(':').ok_or_else(|| format!("split `{s}` must be index:N, date:YYYYMMDD or fraction:F"))?;
        match kind {
            "index" => v.parse().map(SplitPoint::Index).map_err(|e| format!("split index: {e}")),
            "date" => NaiveDate::parse_from_str(v, "%Y%m%d")
                .or_else(|_| NaiveDate::parse_from_str(v, "%Y-%m-%d"))
                .map(SplitPoint::Date)
                .map_err(|e| format!("split date: {e}")),
            "fraction" => match v.parse::<f64>() {
                Ok(x) if x > 0.0 && x < 1.0 => Ok(SplitPoint::Fraction(x)),
                _ => Err(format!("split fraction `{v}` must lie in (0, 1)")),
            },
            _ => Err(format!("unknown split kind `{kind}`")),
        }
    }
}

/// What the boosted trees regress on in the fine-tuning stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FineTuneInput {
    /// The decoder's final feature vector.
    DecoderFeatures,
    /// The network's prediction followed by the window's last row.
    PredictionAndLastRow,
}

/// Which series the networks and trees are trained to predict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetMode {
    /// Next-day close.
    Close,
    /// Next-day ARIMA residual; the ARIMA one-step forecast is added back.
    Residual,
}

/// Network dimensions shared by all variants (the variant decides the
/// encoder, layer count and directionality).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub d_model: usize,
    pub hidden: usize,
    pub layers: usize,
    pub kernels: Vec<usize>,
    pub causal: bool,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture { d_model: 64, hidden: 64, layers: 5, kernels: vec![3], causal: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub arima: ArimaSpec,
    pub train: TrainConfig,
    pub arch: Architecture,
    pub gbt: GbtParams,
    pub split: SplitPoint,
    pub variant: Variant,
    pub finetune_input: FineTuneInput,
    pub target: TargetMode,
    /// Seeds network initialisation, shuffling and dropout.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            arima: ArimaSpec::default(),
            train: TrainConfig::default(),
            arch: Architecture::default(),
            gbt: GbtParams::default(),
            split: SplitPoint::Fraction(0.9),
            variant: Variant::AcnnBilstmXgb,
            finetune_input: FineTuneInput::DecoderFeatures,
            target: TargetMode::Close,
            seed: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("{key}: {e}"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, String> {
    match v {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(format!("{key}: expected true or false, got `{v}`")),
    }
}

impl PipelineConfig {
    pub const KEYS: [&'static str; 26] = [
        "variant",
        "seed",
        "split",
        "target",
        "finetune.input",
        "arima.p",
        "arima.d",
        "arima.q",
        "train.epochs",
        "train.batch_size",
        "train.learning_rate",
        "train.dropout",
        "train.lookback",
        "train.heads",
        "train.clip_norm",
        "model.d_model",
        "model.hidden",
        "model.layers",
        "model.kernels",
        "model.causal",
        "gbt.n_rounds",
        "gbt.max_depth",
        "gbt.learning_rate",
        "gbt.l2_reg",
        "gbt.min_split_gain",
        "gbt.min_child_weight",
    ];

    /// Sets one key. Unknown keys and malformed values are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        match key.trim() {
            "variant" => self.variant = v.parse()?,
            "seed" => self.seed = parse(key, v)?,
            "split" => self.split = v.parse()?,
            "target" => {
                self.target = match v {
                    "close" => TargetMode::Close,
                    "residual" => TargetMode::Residual,
                    _ => return Err(format!("target: expected close or residual, got `{v}`")),
                }
            }
            "finetune.input" => {
                self.finetune_input = match v {
                    "decoder_features" => FineTuneInput::DecoderFeatures,
                    "prediction_and_last_row" => FineTuneInput::PredictionAndLastRow,
                    _ => return Err(format!("finetune.input: expected decoder_features or prediction_and_last_row, got `{v}`")),
                }
            }
            "arima.p" => self.arima.p = parse(key, v)?,
            "arima.d" => self.arima.d = parse(key, v)?,
            "arima.q" => self.arima.q = parse(key, v)?,
            "train.epochs" => self.train.epochs = parse(key, v)?,
            "train.batch_size" => self.train.batch_size = parse(key, v)?,
            "train.learning_rate" => self.train.learning_rate = parse(key, v)?,
            "train.dropout" => self.train.dropout = parse(key, v)?,
            "train.lookback" => self.train.lookback = parse(key, v)?,
            "train.heads" => self.train.heads = parse(key, v)?,
            "train.clip_norm" => self.train.clip_norm = parse(key, v)?,
            "model.d_model" => self.arch.d_model = parse(key, v)?,
            "model.hidden" => self.arch.hidden = parse(key, v)?,
            "model.layers" => self.arch.layers = parse(key, v)?,
            "model.kernels" => {
                self.arch.kernels = v.split(',').map(|k| parse(key, k.trim())).collect::<Result<_, _>>()?
            }
            "model.causal" => self.arch.causal = parse_bool(key, v)?,
            "gbt.n_rounds" => self.gbt.n_rounds = parse(key, v)?,
            "gbt.max_depth" => self.gbt.max_depth = parse(key, v)?,
            "gbt.learning_rate" => self.gbt.learning_rate = parse(key, v)?,
            "gbt.l2_reg" => self.gbt.l2_reg = parse(key, v)?,
            "gbt.min_split_gain" => self.gbt.min_split_gain = parse(key, v)?,
            "gbt.min_child_weight" => self.gbt.min_child_weight = parse(key, v)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Applies `key=value` lines on top of `self`. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), PipelineError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| PipelineError::Config { line: i + 1, message };
            let (k, v) = line.split_once('=').ok_or_else(|| err(format!("expected key=value, got `{line}`")))?;
            self.set(k, v).map_err(err)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, PipelineError> {
        let mut c = PipelineConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    /// Every key in [`KEYS`](Self::KEYS) order; parses back to `self`.
    pub fn to_key_value(&self) -> String {
        let kernels = self.arch.kernels.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let values: [String; 26] = [
            self.variant.to_string(),
            self.seed.to_string(),
            self.split.to_string(),
            match self.target {
                TargetMode::Close => "close".into(),
                TargetMode::Residual => "residual".into(),
            },
            match self.finetune_input {
                FineTuneInput::DecoderFeatures => "decoder_features".into(),
                FineTuneInput::PredictionAndLastRow => "prediction_and_last_row".into(),
            },
            self.arima.p.to_string(),
            self.arima.d.to_string(),
            self.arima.q.to_string(),
            self.train.epochs.to_string(),
            self.train.batch_size.to_string(),
            self.train.learning_rate.to_string(),
            self.train.dropout.to_string(),
            self.train.lookback.to_string(),
            self.train.heads.to_string(),
            self.train.clip_norm.to_string(),
            self.arch.d_model.to_string(),
            self.arch.hidden.to_string(),
            self.arch.layers.to_string(),
            kernels,
            self.arch.causal.to_string(),
            self.gbt.n_rounds.to_string(),
            self.gbt.max_depth.to_string(),
            self.gbt.learning_rate.to_string(),
            self.gbt.l2_reg.to_string(),
            self.gbt.min_split_gain.to_string(),
            self.gbt.min_child_weight.to_string(),
        ];
        Self::KEYS.iter().zip(values).map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::InvalidConfig(m));
        ArimaSpec::new(self.arima.p, self.arima.d, self.arima.q).map_err(PipelineError::Arima)?;
        self.train.validate().map_err(PipelineError::Nn)?;
        self.gbt.validate().map_err(PipelineError::Gbt)?;
        if let Some(mc) = self.variant.model_config(&self.arch, self.train.lookback, super::FEATURE_NAMES.len(), self.train.heads) {
            mc.validate().map_err(PipelineError::Nn)?;
        }
        if self.train.lookback <= self.arima.p + self.arima.d {
            return bad(format!("lookback {} must exceed p + d", self.train.lookback));
        }
        Ok(())
    }
}
