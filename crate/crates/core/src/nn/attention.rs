//! Scaled dot-product attention and multi-head self-attention.

use super::params::{Builder, Init, ParamId};
use super::NnError;
use crate::autodiff::{AutodiffError, Tape, Tensor, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Additive mask value for blocked positions; `exp` of it underflows to 0.
const MASKED: f64 = -1e9;

/// Row-wise attention distribution `softmax(Q·Kᵀ/√d)`, one row per query.
///
/// Works on rank-2 (`N × d`) or batched rank-3 (`B × N × d`) inputs; `d`
/// is the shared key dimension.
pub fn attention_weights(
    tape: &mut Tape,
    q: Var,
    k: Var,
    mask: Option<Var>,
) -> Result<Var, AutodiffError> {
    let d = *tape.value(q).shape().last().expect("rank >= 1");
    let dk = *tape.value(k).shape().last().expect("rank >= 1");
    if d != dk {
        return Err(AutodiffError::ShapeMismatch {
            op: "attention",
            got: tape.value(k).shape().to_vec(),
            expected: tape.value(q).shape().to_vec(),
        });
    }
    let kt = tape.transpose(k)?;
    let logits = tape.matmul(q, kt)?;
    let mut scaled = tape.scale(logits, 1.0 / (d as f64).sqrt())?;
    if let Some(m) = mask {
        scaled = tape.add(scaled, m)?;
    }
    let axis = tape.value(scaled).rank() - 1;
    tape.softmax(scaled, axis)
}

/// `softmax(Q·Kᵀ/√d)·V`: each output row is the attention-weighted sum of
/// the value rows.
pub fn scaled_dot_attention(tape: &mut Tape, q: Var, k: Var, v: Var) -> Result<Var, AutodiffError> {
    masked_attention(tape, q, k, v, None)
}

pub fn masked_attention(
    tape: &mut Tape,
    q: Var,
    k: Var,
    v: Var,
    mask: Option<Var>,
) -> Result<Var, AutodiffError> {
    let ks = tape.value(k).shape();
    let vs = tape.value(v).shape();
    if ks[..ks.len() - 1] != vs[..vs.len() - 1] {
        return Err(AutodiffError::ShapeMismatch { op: "attention", got: vs.to_vec(), expected: ks.to_vec() });
    }
    let w = attention_weights(tape, q, k, mask)?;
    tape.matmul(w, v)
}

/// `n × n` additive mask letting query `i` see keys `0..=i` only.
pub fn causal_mask(n: usize) -> Tensor {
    let data = (0..n * n).map(|i| if i % n > i / n { MASKED } else { 0.0 }).collect();
    Tensor::new(vec![n, n], data).expect("square mask")
}

/// Query/key/value projections of one head (`d_in × d_head`, no bias).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttentionHead {
    pub w_q: ParamId,
    pub w_k: ParamId,
    pub w_v: ParamId,
}

impl AttentionHead {
    pub(crate) fn build<R: Rng>(
        b: &mut Builder<'_, R>,
        prefix: &str,
        d_in: usize,
        d_head: usize,
    ) -> Result<Self, NnError> {
        let bound = 1.0 / (d_in as f64).sqrt();
        Ok(AttentionHead {
            w_q: b.param(format!("{prefix}.w_q"), &[d_in, d_head], Init::Uniform(bound))?,
            w_k: b.param(format!("{prefix}.w_k"), &[d_in, d_head], Init::Uniform(bound))?,
            w_v: b.param(format!("{prefix}.w_v"), &[d_in, d_head], Init::Uniform(bound))?,
        })
    }
}

/// Self-attention of every head over `x` (`[B ×] N × d_in`), outputs
/// concatenated along the feature axis.
pub fn multi_head_self_attention(
    tape: &mut Tape,
    vars: &[Var],
    x: Var,
    heads: &[AttentionHead],
    causal: bool,
) -> Result<Var, AutodiffError> {
    let shape = tape.value(x).shape().to_vec();
    let n = shape[shape.len() - 2];
    let mask = if causal { Some(tape.constant(causal_mask(n))?) } else { None };
    let mut outs = Vec::with_capacity(heads.len());
    for h in heads {
        let q = tape.matmul(x, vars[h.w_q.0])?;
        let k = tape.matmul(x, vars[h.w_k.0])?;
        let v = tape.matmul(x, vars[h.w_v.0])?;
        outs.push(masked_attention(tape, q, k, v, mask)?);
    }
    let axis = shape.len() - 1;
    tape.concat(&outs, axis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::ParamStore;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mat(rows: usize, cols: usize, data: &[f64]) -> Tensor {
        Tensor::new(vec![rows, cols], data.to_vec()).unwrap()
    }

    fn attend(q: Tensor, k: Tensor, v: Tensor) -> Result<Tensor, AutodiffError> {
        let mut t = Tape::new();
        let (q, k, v) = (t.constant(q)?, t.constant(k)?, t.constant(v)?);
        let out = scaled_dot_attention(&mut t, q, k, v)?;
        Ok(t.value(out).clone())
    }

    /// Direct evaluation: weights exp(q·k_j/√d) / Σ exp(q·k_i/√d).
    fn brute_force(q: &[f64], keys: &[Vec<f64>], values: &[Vec<f64>]) -> Vec<f64> {
        let d = q.len() as f64;
        let scores: Vec<f64> = keys.iter().map(|k| k.iter().zip(q).map(|(a, b)| a * b).sum::<f64>() / d.sqrt()).collect();
        let z: f64 = scores.iter().map(|s| s.exp()).sum();
        let mut out = vec![0.0; values[0].len()];
        for (s, v) in scores.iter().zip(values) {
            for (o, x) in out.iter_mut().zip(v) {
                *o += s.exp() / z * x;
            }
        }
        out
    }

    #[test]
    fn single_key_returns_its_value() {
        let out = attend(mat(1, 2, &[3.0, -1.0]), mat(1, 2, &[0.5, 2.0]), mat(1, 3, &[7.0, 8.0, 9.0])).unwrap();
        assert_eq!(out.data(), &[7.0, 8.0, 9.0]);
    }

    #[test]
    fn identical_keys_average_the_values() {
        let out = attend(mat(1, 2, &[0.3, 0.9]), mat(2, 2, &[1.0, 2.0, 1.0, 2.0]), mat(2, 2, &[1.0, 5.0, 3.0, -1.0]))
            .unwrap();
        assert!((out.data()[0] - 2.0).abs() < 1e-15 && (out.data()[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-2.0..2.0)).collect() };
            let (nq, nk, d, dv) = (2, 3, 4, 2);
            let q = draw(nq * d);
            let k = draw(nk * d);
            let v = draw(nk * dv);
            let out = attend(mat(nq, d, &q), mat(nk, d, &k), mat(nk, dv, &v)).unwrap();
            let keys: Vec<Vec<f64>> = k.chunks(d).map(<[f64]>::to_vec).collect();
            let vals: Vec<Vec<f64>> = v.chunks(dv).map(<[f64]>::to_vec).collect();
            for (i, qi) in q.chunks(d).enumerate() {
                let expect = brute_force(qi, &keys, &vals);
                for (a, b) in out.data()[i * dv..(i + 1) * dv].iter().zip(&expect) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(
            attend(mat(1, 2, &[0.0; 2]), mat(2, 3, &[0.0; 6]), mat(2, 1, &[0.0; 2])),
            Err(AutodiffError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            attend(mat(1, 2, &[0.0; 2]), mat(2, 2, &[0.0; 4]), mat(3, 1, &[0.0; 3])),
            Err(AutodiffError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn symmetric_inputs_give_uniform_weights() {
        let mut t = Tape::new();
        let q = t.constant(mat(1, 2, &[1.0, 1.0])).unwrap();
        let k = t.constant(mat(2, 2, &[1.0, 0.0, 0.0, 1.0])).unwrap();
        let w = attention_weights(&mut t, q, k, None).unwrap();
        assert_eq!(t.value(w).data(), &[0.5, 0.5]);
    }

    #[test]
    fn causal_mask_blocks_future_keys() {
        let mut t = Tape::new();
        let x = t.constant(mat(3, 2, &[1.0, 0.0, 0.5, 0.5, 0.0, 1.0])).unwrap();
        let m = t.constant(causal_mask(3)).unwrap();
        let w = attention_weights(&mut t, x, x, Some(m)).unwrap();
        let w = t.value(w).data();
        assert_eq!(w[0], 1.0);
        assert_eq!((w[1], w[2], w[5]), (0.0, 0.0, 0.0));
    }

    fn build_heads(n: usize, d_in: usize, d_head: usize, seed: u64) -> (ParamStore, Vec<AttentionHead>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = Builder::fresh(&mut rng);
        let heads = (0..n).map(|h| AttentionHead::build(&mut b, &format!("h{h}"), d_in, d_head).unwrap()).collect();
        (b.finish().unwrap(), heads)
    }

    fn mhsa(store: &ParamStore, heads: &[AttentionHead], x: Tensor) -> Tensor {
        let mut t = Tape::new();
        let vars = store.bind(&mut t, false).unwrap();
        let x = t.constant(x).unwrap();
        let out = multi_head_self_attention(&mut t, &vars, x, heads, false).unwrap();
        t.value(out).clone()
    }

    #[test]
    fn identity_head_on_single_row_returns_the_row() {
        let (mut store, heads) = build_heads(1, 3, 3, 0);
        for name in ["h0.w_q", "h0.w_k", "h0.w_v"] {
            *store.get_mut(name).unwrap() = mat(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        }
        let out = mhsa(&store, &heads, mat(1, 3, &[0.2, -0.4, 1.5]));
        assert_eq!(out.data(), &[0.2, -0.4, 1.5]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn weights_are_distributions(seed in 0u64..1000, n in 1usize..6, d in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..2 * n * d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mut t = Tape::new();
            let q = t.constant(mat(n, d, &data[..n * d])).unwrap();
            let k = t.constant(mat(n, d, &data[n * d..])).unwrap();
            let w = attention_weights(&mut t, q, k, None).unwrap();
            for row in t.value(w).data().chunks(n) {
                prop_assert!(row.iter().all(|&x| x >= 0.0));
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn concat_width_is_heads_times_head_dim(heads in 1usize..5, d_head in 1usize..4, n in 1usize..5) {
            let (store, hs) = build_heads(heads, 3, d_head, 1);
            let x = Tensor::new(vec![n, 3], (0..3 * n).map(|i| i as f64 * 0.1).collect()).unwrap();
            let out = mhsa(&store, &hs, x);
            prop_assert_eq!(out.shape(), &[n, heads * d_head][..]);
        }

        #[test]
        fn self_attention_is_permutation_equivariant(seed in 0u64..1000, perm_seed in 0u64..1000) {
            let n = 5;
            let (store, hs) = build_heads(2, 3, 2, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let mut perm: Vec<usize> = (0..n).collect();
            use rand::seq::SliceRandom;
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_seed));
            let x = Tensor::new(vec![n, 3], rows.concat()).unwrap();
            let xp = Tensor::new(vec![n, 3], perm.iter().flat_map(|&i| rows[i].clone()).collect()).unwrap();
            let out = mhsa(&store, &hs, x);
            let outp = mhsa(&store, &hs, xp);
            let w = 4;
            for (r, &i) in perm.iter().enumerate() {
                for c in 0..w {
                    prop_assert!((outp.data()[r * w + c] - out.data()[i * w + c]).abs() < 1e-12);
                }
            }
        }
    }
}
