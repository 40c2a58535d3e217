use super::encoder::{AcnnEncoder, EncoderKind};
use super::lstm::LstmStack;
use super::params::{Builder, Init, ParamId, ParamStore};
use super::NnError;
use crate::autodiff::{AutodiffError, Tape, Tensor, Var};
use crate::ts::WindowedDataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Windows per forward pass at inference time.
const INFER_CHUNK: usize = 256;

/// Network shape. Defaults are the full model: 4-head attention + CNN encoder
/// at width 64, five bidirectional LSTM layers of 64 units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub lookback: usize,
    pub features: usize,
    pub encoder: EncoderKind,
    pub d_model: usize,
    pub heads: usize,
    pub kernels: Vec<usize>,
    pub causal: bool,
    pub hidden: usize,
    pub layers: usize,
    pub bidirectional: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            lookback: 20,
            features: 8,
            encoder: EncoderKind::Attention,
            d_model: 64,
            heads: 4,
            kernels: vec![3],
            causal: false,
            hidden: 64,
            layers: 5,
            bidirectional: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |m: &str| Err(NnError::InvalidConfig(m.to_string()));
        if self.lookback == 0 || self.features == 0 || self.hidden == 0 || self.layers == 0 {
            return bad("lookback, features, hidden and layers must be positive");
        }
        if self.encoder != EncoderKind::None {
            if self.d_model == 0 || self.kernels.is_empty() || self.kernels.contains(&0) {
                return bad("encoder needs d_model > 0 and non-empty positive kernel widths");
            }
            if !self.d_model.is_multiple_of(self.kernels.len()) {
                return bad("d_model must be divisible by the number of kernel widths");
            }
        }
        if self.encoder == EncoderKind::Attention && (self.heads == 0 || !self.d_model.is_multiple_of(self.heads)) {
            return bad("heads must be positive and divide d_model");
        }
        Ok(())
    }

    /// Width of the decoder feature vector.
    pub fn feature_width(&self) -> usize {
        if self.bidirectional {
            2 * self.hidden
        } else {
            self.hidden
        }
    }
}

/// Encoder → stacked LSTM → affine head.
#[derive(Debug, Clone, PartialEq)]
pub struct Seq2SeqModel {
    config: ModelConfig,
    params: ParamStore,
    encoder: Option<AcnnEncoder>,
    decoder: LstmStack,
    head_w: ParamId,
    head_b: ParamId,
}

impl Seq2SeqModel {
    /// Freshly initialised model; the same seed gives the same weights.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, NnError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::assemble(config, Builder::fresh(&mut rng))
    }

    /// Rebuilds a model from saved parameters, checking names and shapes.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self, NnError> {
        Self::assemble(config, Builder::<ChaCha8Rng>::saved(params))
    }

    fn assemble<R: Rng>(config: ModelConfig, mut b: Builder<'_, R>) -> Result<Self, NnError> {
        config.validate()?;
        let encoder = match config.encoder {
            EncoderKind::None => None,
            kind => Some(AcnnEncoder::build(
                &mut b,
                kind,
                config.features,
                config.d_model,
                config.heads,
                &config.kernels,
                config.causal,
            )?),
        };
        let d_in = if encoder.is_some() { config.d_model } else { config.features };
        let decoder = LstmStack::build(&mut b, d_in, config.hidden, config.layers, config.bidirectional)?;
        let width = decoder.output_width();
        let bound = 1.0 / (width as f64).sqrt();
        let head_w = b.param("head.w".into(), &[width, 1], Init::Uniform(bound))?;
        let head_b = b.param("head.b".into(), &[1], Init::Const(0.0))?;
        let params = b.finish()?;
        Ok(Seq2SeqModel { config, params, encoder, decoder, head_w, head_b })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn into_params(self) -> ParamStore {
        self.params
    }

    /// Batched forward pass on `x` (`B × lookback × features`) with `vars`
    /// bound from [`params`](Self::params). Returns the `B × 1` predictions
    /// and the `B × width` decoder features.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        x: Var,
        dropout: f64,
        train: bool,
        rng: &mut R,
    ) -> Result<(Var, Var), AutodiffError> {
        let context = self.encode_var(tape, vars, x, dropout, train, rng)?;
        self.decode_var(tape, vars, context, dropout, train, rng)
    }

    fn encode_var<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        x: Var,
        dropout: f64,
        train: bool,
        rng: &mut R,
    ) -> Result<Var, AutodiffError> {
        match &self.encoder {
            Some(enc) => enc.forward(tape, vars, x, dropout, train, rng),
            None => Ok(x),
        }
    }

    fn decode_var<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        context: Var,
        dropout: f64,
        train: bool,
        rng: &mut R,
    ) -> Result<(Var, Var), AutodiffError> {
        let feats = self.decoder.forward(tape, vars, context, dropout, train, rng)?;
        let y = tape.matmul(feats, vars[self.head_w.0])?;
        let y = tape.add(y, vars[self.head_b.0])?;
        Ok((y, feats))
    }

    fn check_window(&self, len: usize) -> Result<(), NnError> {
        let expected = self.config.lookback * self.config.features;
        if len != expected {
            return Err(NnError::ShapeMismatch { got: vec![len], expected: vec![expected] });
        }
        Ok(())
    }

    /// Eval-mode encoder output (`lookback × d_model`) for one row-major
    /// window. Without an encoder the window is returned as is.
    pub fn encode(&self, window: &[f64]) -> Result<Tensor, NnError> {
        self.check_window(window.len())?;
        let (l, f) = (self.config.lookback, self.config.features);
        let mut tape = Tape::new();
        let vars = self.params.bind(&mut tape, false)?;
        let x = tape.constant(Tensor::new(vec![1, l, f], window.to_vec())?)?;
        let out = self.encode_var(&mut tape, &vars, x, 0.0, false, &mut NoRng)?;
        let t = tape.value(out);
        Ok(Tensor::new(t.shape()[1..].to_vec(), t.data().to_vec())?)
    }

    /// Runs the decoder and head on a `lookback × width` context.
    pub fn decode(&self, context: &Tensor) -> Result<(f64, Vec<f64>), NnError> {
        let d_in = if self.encoder.is_some() { self.config.d_model } else { self.config.features };
        if context.shape() != [self.config.lookback, d_in] {
            return Err(NnError::ShapeMismatch { got: context.shape().to_vec(), expected: vec![self.config.lookback, d_in] });
        }
        let mut tape = Tape::new();
        let vars = self.params.bind(&mut tape, false)?;
        let c = tape.constant(Tensor::new(vec![1, self.config.lookback, d_in], context.data().to_vec())?)?;
        let (y, feats) = self.decode_var(&mut tape, &vars, c, 0.0, false, &mut NoRng)?;
        Ok((tape.value(y).data()[0], tape.value(feats).data().to_vec()))
    }

    /// Eval-mode prediction and decoder features for one window.
    pub fn predict_window(&self, window: &[f64]) -> Result<(f64, Vec<f64>), NnError> {
        let (p, f) = self.infer_windows(&[window])?;
        Ok((p[0], f.into_iter().next().expect("one window")))
    }

    /// Eval-mode predictions and decoder features for every sample.
    pub fn infer(&self, data: &WindowedDataset) -> Result<(Vec<f64>, Vec<Vec<f64>>), NnError> {
        self.check_dataset(data)?;
        let mut preds = Vec::with_capacity(data.len());
        let mut feats = Vec::with_capacity(data.len());
        let idx: Vec<usize> = (0..data.len()).collect();
        for chunk in idx.chunks(INFER_CHUNK) {
            let windows: Vec<&[f64]> = chunk.iter().map(|&k| data.input(k)).collect();
            let (p, f) = self.infer_windows(&windows)?;
            preds.extend(p);
            feats.extend(f);
        }
        Ok((preds, feats))
    }

    pub fn predict(&self, data: &WindowedDataset) -> Result<Vec<f64>, NnError> {
        Ok(self.infer(data)?.0)
    }

    pub(crate) fn check_dataset(&self, data: &WindowedDataset) -> Result<(), NnError> {
        if data.lookback() != self.config.lookback || data.features() != self.config.features {
            return Err(NnError::ShapeMismatch {
                got: vec![data.lookback(), data.features()],
                expected: vec![self.config.lookback, self.config.features],
            });
        }
        Ok(())
    }

    fn infer_windows(&self, windows: &[&[f64]]) -> Result<(Vec<f64>, Vec<Vec<f64>>), NnError> {
        for w in windows {
            self.check_window(w.len())?;
        }
        let mut tape = Tape::new();
        let vars = self.params.bind(&mut tape, false)?;
        let x = tape.constant(batch_tensor(windows, self.config.lookback, self.config.features))?;
        let (y, feats) = self.forward(&mut tape, &vars, x, 0.0, false, &mut NoRng)?;
        let width = self.config.feature_width();
        let f = tape.value(feats).data().chunks(width).map(<[f64]>::to_vec).collect();
        Ok((tape.value(y).data().to_vec(), f))
    }
}

/// Stacks row-major windows into a `B × lookback × features` tensor.
pub(crate) fn batch_tensor(windows: &[&[f64]], lookback: usize, features: usize) -> Tensor {
    let data: Vec<f64> = windows.iter().flat_map(|w| w.iter().copied()).collect();
    Tensor::new(vec![windows.len(), lookback, features], data).expect("non-empty batch of full windows")
}

/// Randomness source for eval-mode passes, where dropout never draws.
struct NoRng;

impl rand::RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("eval mode draws no random numbers")
    }
    fn next_u64(&mut self) -> u64 {
        unreachable!("eval mode draws no random numbers")
    }
    fn fill_bytes(&mut self, _: &mut [u8]) {
        unreachable!("eval mode draws no random numbers")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::gradcheck;

    fn window(cfg: &ModelConfig, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..cfg.lookback * cfg.features).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn small() -> ModelConfig {
        ModelConfig { lookback: 6, features: 3, d_model: 8, heads: 2, hidden: 5, layers: 2, ..ModelConfig::default() }
    }

    #[test]
    fn default_feature_width_is_128() {
        let cfg = ModelConfig { lookback: 20, ..ModelConfig::default() };
        let m = Seq2SeqModel::new(cfg.clone(), 1).unwrap();
        let (_, f) = m.predict_window(&window(&cfg, 2)).unwrap();
        assert_eq!(f.len(), 128);
        assert_eq!(m.encode(&window(&cfg, 2)).unwrap().shape(), &[20, 64]);
    }

    #[test]
    fn encode_is_deterministic_in_eval_mode() {
        let cfg = small();
        let m = Seq2SeqModel::new(cfg.clone(), 3).unwrap();
        let w = window(&cfg, 4);
        assert_eq!(m.encode(&w).unwrap(), m.encode(&w).unwrap());
    }

    #[test]
    fn train_mode_without_dropout_matches_eval() {
        let cfg = small();
        let m = Seq2SeqModel::new(cfg.clone(), 3).unwrap();
        let w = window(&cfg, 5);
        let run = |train: bool| {
            let mut tape = Tape::new();
            let vars = m.params().bind(&mut tape, true).unwrap();
            let x = tape.constant(batch_tensor(&[&w], cfg.lookback, cfg.features)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let (y, _) = m.forward(&mut tape, &vars, x, 0.0, train, &mut rng).unwrap();
            tape.value(y).data()[0]
        };
        assert_eq!(run(true), run(false));
    }

    #[test]
    fn zero_weights_give_zero_features_and_bias_prediction() {
        let cfg = small();
        let mut m = Seq2SeqModel::new(cfg.clone(), 3).unwrap();
        for t in m.params_mut().tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        m.params_mut().get_mut("head.b").unwrap().data_mut()[0] = 0.75;
        let (p, f) = m.predict_window(&window(&cfg, 6)).unwrap();
        assert!(f.iter().all(|&v| v == 0.0));
        assert_eq!(p, 0.75);
    }

    #[test]
    fn reversed_input_swaps_directions_with_mirrored_weights() {
        let cfg = ModelConfig { encoder: EncoderKind::None, layers: 1, hidden: 4, ..small() };
        let mut m = Seq2SeqModel::new(cfg.clone(), 7).unwrap();
        for part in ["w_x", "w_h", "b"] {
            let fwd = m.params().get(&format!("decoder.l0.fwd.{part}")).unwrap().clone();
            *m.params_mut().get_mut(&format!("decoder.l0.bwd.{part}")).unwrap() = fwd;
        }
        let w = window(&cfg, 8);
        let rev: Vec<f64> = w.chunks(cfg.features).rev().flatten().copied().collect();
        let (_, f) = m.predict_window(&w).unwrap();
        let (_, fr) = m.predict_window(&rev).unwrap();
        let h = cfg.hidden;
        for i in 0..h {
            assert!((fr[i] - f[h + i]).abs() < 1e-12);
            assert!((fr[h + i] - f[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn batched_inference_matches_single_windows() {
        let cfg = small();
        let m = Seq2SeqModel::new(cfg.clone(), 9).unwrap();
        let w1 = window(&cfg, 10);
        let w2 = window(&cfg, 11);
        let (p, f) = m.infer_windows(&[&w1, &w2]).unwrap();
        let (p2, f2) = m.predict_window(&w2).unwrap();
        assert!((p[1] - p2).abs() < 1e-12);
        assert!(f[1].iter().zip(&f2).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn rebuild_from_params_round_trips() {
        let cfg = small();
        let m = Seq2SeqModel::new(cfg.clone(), 12).unwrap();
        let again = Seq2SeqModel::from_params(cfg.clone(), m.params().clone()).unwrap();
        assert_eq!(again, m);
        let wrong = ModelConfig { hidden: 6, ..cfg.clone() };
        assert!(matches!(Seq2SeqModel::from_params(wrong, m.params().clone()), Err(NnError::ParameterShape { .. })));
        let fewer = ModelConfig { layers: 1, ..cfg };
        assert!(matches!(Seq2SeqModel::from_params(fewer, m.params().clone()), Err(NnError::UnexpectedParameter(_))));
    }

    #[test]
    fn rejects_bad_configs_and_windows() {
        assert!(Seq2SeqModel::new(ModelConfig { heads: 3, ..ModelConfig::default() }, 0).is_err());
        assert!(Seq2SeqModel::new(ModelConfig { layers: 0, ..ModelConfig::default() }, 0).is_err());
        let m = Seq2SeqModel::new(small(), 0).unwrap();
        assert!(matches!(m.encode(&[0.0; 5]), Err(NnError::ShapeMismatch { .. })));
    }

    #[test]
    fn full_model_gradient_check() {
        let cfg = ModelConfig {
            lookback: 4,
            features: 2,
            d_model: 4,
            heads: 2,
            hidden: 3,
            layers: 1,
            ..ModelConfig::default()
        };
        for seed in 0..3 {
            let m = Seq2SeqModel::new(cfg.clone(), seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let x: Vec<f64> = (0..3 * 8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let report = gradcheck::check(
                m.params().tensors(),
                |tape, vars| {
                    let xv = tape.constant(Tensor::new(vec![3, 4, 2], x.clone())?)?;
                    let yv = tape.constant(Tensor::new(vec![3, 1], y.clone())?)?;
                    let (p, _) = m.forward(tape, vars, xv, 0.0, false, &mut NoRng)?;
                    tape.mse_loss(p, yv)
                },
                1e-5,
                None,
            )
            .unwrap();
            assert!(report.max_rel_error < 1e-4, "seed {seed}: {report:?}");
        }
    }
}
