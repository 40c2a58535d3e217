use super::NnError;
use crate::autodiff::{AutodiffError, Tape, Tensor, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Index of a tensor in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

/// Named trainable tensors in creation order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &mut self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Appends a tensor; used when rebuilding from a saved list.
    pub fn push(&mut self, name: String, tensor: Tensor) {
        self.names.push(name);
        self.tensors.push(tensor);
    }

    /// Puts every tensor on the tape, as parameters when `trainable`.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Result<Vec<Var>, AutodiffError> {
        self.tensors
            .iter()
            .map(|t| if trainable { tape.param(t.clone()) } else { tape.constant(t.clone()) })
            .collect()
    }
}

/// Initialisation rule for a fresh parameter.
pub(crate) enum Init {
    /// uniform(-bound, bound)
    Uniform(f64),
    Const(f64),
    /// Constant per slice of length `chunk`: `values[i / chunk]`.
    Chunked { chunk: usize, values: Vec<f64> },
}

/// Creates parameters either freshly initialised or taken from a saved set
/// (by name, with shape validation).
pub(crate) struct Builder<'a, R: Rng> {
    store: ParamStore,
    source: Source<'a, R>,
}

enum Source<'a, R: Rng> {
    Fresh(&'a mut R),
    Saved(HashMap<String, Tensor>),
}

impl<'a, R: Rng> Builder<'a, R> {
    pub fn fresh(rng: &'a mut R) -> Self {
        Builder { store: ParamStore::default(), source: Source::Fresh(rng) }
    }

    pub fn saved(params: ParamStore) -> Self {
        let map = params.names.into_iter().zip(params.tensors).collect();
        Builder { store: ParamStore::default(), source: Source::Saved(map) }
    }

    pub fn param(&mut self, name: String, shape: &[usize], init: Init) -> Result<ParamId, NnError> {
        let tensor = match &mut self.source {
            Source::Fresh(rng) => {
                let n: usize = shape.iter().product();
                let data = match init {
                    Init::Uniform(b) => (0..n).map(|_| rng.random_range(-b..=b)).collect(),
                    Init::Const(c) => vec![c; n],
                    Init::Chunked { chunk, values } => (0..n).map(|i| values[i / chunk]).collect(),
                };
                Tensor::new(shape.to_vec(), data)?
            }
            Source::Saved(map) => {
                let t = map.remove(&name).ok_or_else(|| NnError::MissingParameter(name.clone()))?;
                if t.shape() != shape {
                    return Err(NnError::ParameterShape { name, got: t.shape().to_vec(), expected: shape.to_vec() });
                }
                t
            }
        };
        self.store.names.push(name);
        self.store.tensors.push(tensor);
        Ok(ParamId(self.store.len() - 1))
    }

    pub fn finish(self) -> Result<ParamStore, NnError> {
        if let Source::Saved(map) = &self.source {
            if let Some(extra) = map.keys().min() {
                return Err(NnError::UnexpectedParameter(extra.clone()));
            }
        }
        Ok(self.store)
    }
}
