//! Self-describing JSON container for a [`TrainedPipeline`].
//!
//! Floats are written in shortest round-trip form and parsed back exactly,
//! so a loaded pipeline predicts bit-identically.

use super::{NormParams, PipelineConfig, PipelineError, TrainedPipeline, Variant};
use crate::arima::ArModel;
use crate::autodiff::Tensor;
use crate::gbt::GbtEnsemble;
use crate::nn::{ModelConfig, ParamStore, Seq2SeqModel};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const FORMAT: &str = "stockseq-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Network {
    config: ModelConfig,
    params: Vec<NamedTensor>,
}

#[derive(Serialize, Deserialize)]
struct Container {
    format: String,
    version: u32,
    seed: u64,
    variant: Variant,
    config: PipelineConfig,
    split_index: usize,
    arima: ArModel,
    norm: NormParams,
    network: Option<Network>,
    gbt: Option<GbtEnsemble>,
}

fn bad(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Checkpoint(e.to_string())
}

pub fn to_json(p: &TrainedPipeline) -> Result<String, PipelineError> {
    let network = p.model.as_ref().map(|m| Network {
        config: m.config().clone(),
        params: m
            .params()
            .iter()
            .map(|(name, t)| NamedTensor { name: name.to_string(), shape: t.shape().to_vec(), data: t.data().to_vec() })
            .collect(),
    });
    let c = Container {
        format: FORMAT.into(),
        version: VERSION,
        seed: p.config.seed,
        variant: p.config.variant,
        config: p.config.clone(),
        split_index: p.split_index,
        arima: p.arima.clone(),
        norm: p.norm.clone(),
        network,
        gbt: p.gbt.clone(),
    };
    serde_json::to_string(&c).map_err(bad)
}

pub fn from_json(text: &str) -> Result<TrainedPipeline, PipelineError> {
    let c: Container = serde_json::from_str(text).map_err(bad)?;
    if c.format != FORMAT {
        return Err(bad(format!("not a checkpoint (format `{}`)", c.format)));
    }
    if c.version != VERSION {
        return Err(bad(format!("unsupported version {}", c.version)));
    }
    if c.variant != c.config.variant || c.seed != c.config.seed {
        return Err(bad("header disagrees with the stored config"));
    }
    let model = match c.network {
        Some(n) => {
            let mut store = ParamStore::default();
            for t in n.params {
                store.push(t.name, Tensor::new(t.shape, t.data).map_err(bad)?);
            }
            Some(Seq2SeqModel::from_params(n.config, store).map_err(PipelineError::Nn)?)
        }
        None => None,
    };
    if c.variant.uses_network() != model.is_some() || c.variant.uses_gbt() != c.gbt.is_some() {
        return Err(bad(format!("stored models do not match variant {}", c.variant)));
    }
    Ok(TrainedPipeline { config: c.config, split_index: c.split_index, arima: c.arima, norm: c.norm, model, gbt: c.gbt })
}

pub fn save(p: &TrainedPipeline, path: impl AsRef<Path>) -> Result<(), PipelineError> {
    let path = path.as_ref();
    std::fs::write(path, to_json(p)?).map_err(|e| bad(format!("{}: {e}", path.display())))
}

pub fn load(path: impl AsRef<Path>) -> Result<TrainedPipeline, PipelineError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    from_json(&text)
}
