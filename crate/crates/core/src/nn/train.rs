use super::adam::{clip_global_norm, Adam};
use super::model::{batch_tensor, Seq2SeqModel};
use super::NnError;
use crate::autodiff::{AutodiffError, Tape, Tensor};
use crate::ts::WindowedDataset;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub lookback: usize,
    pub heads: usize,
    pub seed: u64,
    /// Ceiling on the joint L2 norm of all gradients.
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            learning_rate: 0.01,
            dropout: 0.3,
            lookback: 20,
            heads: 4,
            seed: 0,
            clip_norm: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |m: &str| Err(NnError::InvalidConfig(m.to_string()));
        if self.epochs == 0 || self.batch_size == 0 || self.heads == 0 || self.lookback == 0 {
            return bad("epochs, batch_size, heads and lookback must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.clip_norm > 0.0 && self.clip_norm.is_finite()) {
            return bad("clip_norm must be positive");
        }
        Ok(())
    }
}

/// Trains on mean squared error with shuffled mini-batches and Adam.
/// Returns the mean training loss of each epoch.
pub fn train(model: &mut Seq2SeqModel, data: &WindowedDataset, cfg: &TrainConfig) -> Result<Vec<f64>, NnError> {
    train_with(model, data, cfg, |_, _| {})
}

/// [`train`] with a callback receiving `(epoch, loss)` after every epoch.
pub fn train_with(
    model: &mut Seq2SeqModel,
    data: &WindowedDataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<Vec<f64>, NnError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    model.check_dataset(data)?;
    if cfg.lookback != model.config().lookback {
        return Err(NnError::InvalidConfig(format!(
            "lookback {} differs from the model's {}",
            cfg.lookback,
            model.config().lookback
        )));
    }
    let (l, f) = (model.config().lookback, model.config().features);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(cfg.learning_rate);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut tape = Tape::new();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let at = |source: AutodiffError| NnError::NonFinite { epoch, batch, source };
            tape.reset();
            let windows: Vec<&[f64]> = idx.iter().map(|&k| data.input(k)).collect();
            let targets: Vec<f64> = idx.iter().map(|&k| data.targets()[k]).collect();
            let vars = model.params().bind(&mut tape, true)?;
            let x = tape.constant(batch_tensor(&windows, l, f)).map_err(at)?;
            let y = tape.constant(Tensor::new(vec![idx.len(), 1], targets)?).map_err(at)?;
            let (pred, _) = model.forward(&mut tape, &vars, x, cfg.dropout, true, &mut rng).map_err(at)?;
            let loss = tape.mse_loss(pred, y).map_err(at)?;
            total += tape.value(loss).data()[0] * idx.len() as f64;
            let grads = tape.backward(loss).map_err(at)?;
            let mut g: Vec<Tensor> = vars
                .iter()
                .zip(model.params().tensors())
                .map(|(&v, p)| grads.wrt(v, p.shape()))
                .collect();
            let norm = clip_global_norm(&mut g, cfg.clip_norm);
            if !norm.is_finite() {
                return Err(at(AutodiffError::NonFiniteValue("gradient")));
            }
            opt.step(model.params_mut().tensors_mut(), &g)?;
        }
        let mean = total / data.len() as f64;
        history.push(mean);
        on_epoch(epoch, mean);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{EncoderKind, ModelConfig};
    use crate::ts::FeatureMatrix;

    fn tiny_model(features: usize, lookback: usize, encoder: EncoderKind) -> Seq2SeqModel {
        let cfg = ModelConfig {
            lookback,
            features,
            encoder,
            d_model: 8,
            heads: 2,
            hidden: 8,
            layers: 1,
            ..ModelConfig::default()
        };
        Seq2SeqModel::new(cfg, 1).unwrap()
    }

    fn quick(lookback: usize) -> TrainConfig {
        TrainConfig { epochs: 50, batch_size: 16, dropout: 0.0, lookback, heads: 2, seed: 5, ..TrainConfig::default() }
    }

    #[test]
    fn constant_target_is_fitted() {
        let n = 40;
        let fm = FeatureMatrix::from_columns(vec![("x".into(), vec![0.5; n])]).unwrap();
        let ds = WindowedDataset::build(&fm, &vec![0.3; n], 4).unwrap();
        let mut m = tiny_model(1, 4, EncoderKind::Attention);
        let h = train(&mut m, &ds, &quick(4)).unwrap();
        assert_eq!(h.len(), 50);
        assert!(h[49] < h[0] * 0.05, "{} -> {}", h[0], h[49]);
        assert!(h[49] < 1e-3);
    }

    #[test]
    fn linear_target_reaches_ten_percent_rmse() {
        // Target is a fixed linear function of the last row.
        let n = 200;
        let a: Vec<f64> = (0..n).map(|i| ((i * 7919) % 97) as f64 / 97.0).collect();
        let b: Vec<f64> = (0..n).map(|i| ((i * 104729) % 89) as f64 / 89.0).collect();
        let target: Vec<f64> = (0..n).map(|t| if t == 0 { 0.0 } else { 0.6 * a[t - 1] - 0.3 * b[t - 1] + 0.2 }).collect();
        let fm = FeatureMatrix::from_columns(vec![("a".into(), a), ("b".into(), b)]).unwrap();
        let ds = WindowedDataset::build(&fm, &target, 3).unwrap();
        let mut m = tiny_model(2, 3, EncoderKind::None);
        let cfg = TrainConfig { epochs: 60, ..quick(3) };
        train(&mut m, &ds, &cfg).unwrap();
        let pred = m.predict(&ds).unwrap();
        let y = ds.targets();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
        let rmse = (pred.iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
        assert!(rmse < 0.1 * sd, "rmse {rmse} sd {sd}");
    }

    #[test]
    fn same_seed_gives_identical_history() {
        let n = 30;
        let v: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let fm = FeatureMatrix::from_columns(vec![("v".into(), v.clone())]).unwrap();
        let ds = WindowedDataset::build(&fm, &v, 5).unwrap();
        let cfg = TrainConfig { epochs: 5, dropout: 0.3, ..quick(5) };
        let mut m1 = tiny_model(1, 5, EncoderKind::Attention);
        let mut m2 = tiny_model(1, 5, EncoderKind::Attention);
        let h1 = train(&mut m1, &ds, &cfg).unwrap();
        let h2 = train(&mut m2, &ds, &cfg).unwrap();
        assert_eq!(h1.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), h2.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        assert_eq!(m1, m2);
        assert!(h1.iter().all(|l| l.is_finite()));
    }

    #[test]
    fn rejects_empty_data_and_bad_config() {
        let fm = FeatureMatrix::from_columns(vec![("v".into(), vec![1.0; 10])]).unwrap();
        let ds = WindowedDataset::build(&fm, &[1.0; 10], 5).unwrap();
        let mut m = tiny_model(1, 5, EncoderKind::None);
        let empty = ds.subset(0..0);
        assert!(matches!(train(&mut m, &empty, &quick(5)), Err(NnError::EmptyDataset)));
        let bad = TrainConfig { dropout: 1.0, ..quick(5) };
        assert!(matches!(train(&mut m, &ds, &bad), Err(NnError::InvalidConfig(_))));
        assert!(matches!(train(&mut m, &ds, &quick(4)), Err(NnError::InvalidConfig(_))));
    }

    #[test]
    fn non_finite_input_reports_epoch_and_batch() {
        let fm = FeatureMatrix::from_columns(vec![("v".into(), vec![1e200; 10])]).unwrap();
        let ds = WindowedDataset::build(&fm, &[1e200; 10], 5).unwrap();
        let mut m = tiny_model(1, 5, EncoderKind::None);
        match train(&mut m, &ds, &quick(5)) {
            Err(NnError::NonFinite { epoch: 0, batch: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
    }
}
