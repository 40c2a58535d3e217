use super::gradcheck::check;
use super::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rand_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

/// Contracts an arbitrary output against fixed random weights so every
/// output entry gets a distinct upstream gradient.
fn project(tape: &mut Tape, y: Var, seed: u64) -> Result<Var, AutodiffError> {
    let shape = tape.value(y).shape().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = tape.constant(rand_tensor(&shape, &mut rng))?;
    let p = tape.mul(y, w)?;
    tape.mean(p)
}

fn assert_grad<F>(params: Vec<Tensor>, f: F)
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, AutodiffError>,
{
    let r = check(&params, f, H, None).unwrap();
    assert!(r.max_rel_error < TOL, "{r:?}");
}

#[test]
fn softmax_of_equal_logits_is_uniform() {
    let mut t = Tape::new();
    let x = t.constant(Tensor::vector(vec![0.0; 3])).unwrap();
    let y = t.softmax(x, 0).unwrap();
    for v in t.value(y).data() {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn identity_kernel_conv_is_identity() {
    let mut t = Tape::new();
    let data = vec![0.5, -1.0, 2.0, 3.5, 0.25];
    let x = t.constant(Tensor::new(vec![1, 5, 1], data.clone()).unwrap()).unwrap();
    let w = t.constant(Tensor::new(vec![1, 1, 1], vec![1.0]).unwrap()).unwrap();
    let y = t.conv1d(x, w).unwrap();
    assert_eq!(t.value(y).data(), data.as_slice());
}

#[test]
fn same_padding_keeps_length_and_pads_with_zeros() {
    let mut t = Tape::new();
    let x = t.constant(Tensor::new(vec![1, 4, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap()).unwrap();
    let w = t.constant(Tensor::new(vec![3, 1, 1], vec![1.0, 1.0, 1.0]).unwrap()).unwrap();
    let y = t.conv1d(x, w).unwrap();
    assert_eq!(t.value(y).data(), &[3.0, 6.0, 9.0, 7.0]);
}

#[test]
fn mse_of_identical_inputs_is_zero() {
    let mut t = Tape::new();
    let x = t.constant(Tensor::vector(vec![1.5, -2.0, 7.0])).unwrap();
    let l = t.mse_loss(x, x).unwrap();
    assert_eq!(t.value(l).data(), &[0.0]);
}

#[test]
fn mean_gradient_is_one_over_n() {
    let mut t = Tape::new();
    let x = t.param(Tensor::vector(vec![3.0, 1.0, 4.0, 1.0, 5.0])).unwrap();
    let m = t.mean(x).unwrap();
    let g = t.backward(m).unwrap();
    assert!(g.get(x).unwrap().data().iter().all(|&v| v == 0.2));
}

#[test]
fn hand_chain_rule_single_weight() {
    let mut t = Tape::new();
    let w = t.param(Tensor::new(vec![1, 1], vec![2.0]).unwrap()).unwrap();
    let x = t.constant(Tensor::new(vec![1, 1], vec![3.0]).unwrap()).unwrap();
    let y = t.constant(Tensor::new(vec![1, 1], vec![5.0]).unwrap()).unwrap();
    let p = t.matmul(w, x).unwrap();
    let l = t.mse_loss(p, y).unwrap();
    let g = t.backward(l).unwrap();
    assert_eq!(g.get(w).unwrap().data(), &[6.0]);
}

#[test]
fn backward_errors() {
    let mut t = Tape::new();
    let x = t.param(Tensor::vector(vec![1.0, 2.0])).unwrap();
    assert!(matches!(t.backward(x), Err(AutodiffError::NonScalarLoss(_))));
    let m = t.mean(x).unwrap();
    t.backward(m).unwrap();
    assert_eq!(t.backward(m).unwrap_err(), AutodiffError::TapeAlreadyConsumed);
    assert_eq!(t.mean(x).unwrap_err(), AutodiffError::TapeAlreadyConsumed);
    t.reset();
    assert!(t.is_empty());
}

#[test]
fn shape_and_finiteness_errors() {
    let mut t = Tape::new();
    let a = t.constant(Tensor::zeros(&[2, 3])).unwrap();
    let b = t.constant(Tensor::zeros(&[2, 3])).unwrap();
    assert!(matches!(t.matmul(a, b), Err(AutodiffError::ShapeMismatch { op: "matmul", .. })));
    let c = t.constant(Tensor::zeros(&[3])).unwrap();
    assert!(t.add(a, c).is_ok());
    let d = t.constant(Tensor::zeros(&[2])).unwrap();
    assert!(matches!(t.add(a, d), Err(AutodiffError::ShapeMismatch { .. })));
    let big = t.constant(Tensor::vector(vec![1e300])).unwrap();
    assert_eq!(t.mul(big, big).unwrap_err(), AutodiffError::NonFiniteValue("mul"));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(t.dropout(a, 1.0, &mut rng, true).is_err());
    assert!(Tensor::new(vec![2, 2], vec![1.0]).is_err());
}

#[test]
fn gradcheck_every_op() {
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a23 = rand_tensor(&[2, 3], &mut rng);
        let b34 = rand_tensor(&[3, 4], &mut rng);
        let a234 = rand_tensor(&[2, 3, 4], &mut rng);
        let b245 = rand_tensor(&[2, 4, 5], &mut rng);
        let bias = rand_tensor(&[4], &mut rng);
        let c23 = rand_tensor(&[2, 3], &mut rng);
        let w = rand_tensor(&[3, 3, 2], &mut rng);
        let w5 = rand_tensor(&[5, 4, 3], &mut rng);

        assert_grad(vec![a23.clone(), b34.clone()], |t, v| {
            let y = t.matmul(v[0], v[1])?;
            project(t, y, seed)
        });
        assert_grad(vec![a234.clone(), b34.clone().transpose_for_test()], |t, v| {
            let y = t.matmul(v[0], v[1])?;
            project(t, y, seed)
        });
        assert_grad(vec![a234.clone(), b245.clone()], |t, v| {
            let y = t.matmul(v[0], v[1])?;
            project(t, y, seed)
        });
        assert_grad(vec![a234.clone(), bias.clone()], |t, v| {
            let y = t.add(v[0], v[1])?;
            project(t, y, seed)
        });
        assert_grad(vec![a23.clone(), c23.clone()], |t, v| {
            let y = t.mul(v[0], v[1])?;
            let z = t.scale(y, -1.7)?;
            project(t, z, seed)
        });
        assert_grad(vec![a234.clone(), a234.clone()], |t, v| {
            let y = t.concat(&[v[0], v[1]], 1)?;
            let z = t.concat(&[y, y], 2)?;
            project(t, z, seed)
        });
        assert_grad(vec![a234.clone()], |t, v| {
            let y = t.slice(v[0], 2, 1, 2)?;
            let z = t.reshape(y, &[3, 4])?;
            let u = t.transpose(z)?;
            project(t, u, seed)
        });
        assert_grad(vec![a234.clone(), w.clone()], |t, v| {
            let x = t.transpose(v[0])?; // 2 × 4 × 3
            let y = t.conv1d(x, v[1])?;
            project(t, y, seed)
        });
        assert_grad(vec![a234.clone(), w5.clone()], |t, v| {
            let y = t.conv1d(v[0], v[1])?;
            project(t, y, seed)
        });
        for axis in 0..3 {
            assert_grad(vec![a234.clone()], move |t, v| {
                let y = t.softmax(v[0], axis)?;
                project(t, y, seed + 10)
            });
        }
        assert_grad(vec![a234.clone()], |t, v| {
            let s = t.sigmoid(v[0])?;
            let h = t.tanh(s)?;
            let r = t.relu(v[0])?;
            let y = t.mul(h, r)?;
            project(t, y, seed)
        });
        assert_grad(vec![a23.clone(), c23.clone()], |t, v| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = t.dropout(v[0], 0.3, &mut rng, true)?;
            t.mse_loss(d, v[1])
        });
    }
}

trait TransposeForTest {
    fn transpose_for_test(self) -> Tensor;
}

impl TransposeForTest for Tensor {
    /// Re-labels a 3 × 4 tensor as 4 × 3 (values reused; only the shape matters here).
    fn transpose_for_test(self) -> Tensor {
        let s = self.shape().to_vec();
        Tensor::new(vec![s[1], s[0]], self.into_data()).unwrap()
    }
}

#[test]
fn gradients_are_bit_deterministic() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let x = rand_tensor(&[4, 6, 3], &mut rng);
        let w = rand_tensor(&[3, 3, 5], &mut rng);
        let mut t = Tape::new();
        let xv = t.constant(x).unwrap();
        let wv = t.param(w).unwrap();
        let y = t.conv1d(xv, wv).unwrap();
        let mut drop_rng = ChaCha8Rng::seed_from_u64(5);
        let d = t.dropout(y, 0.3, &mut drop_rng, true).unwrap();
        let s = t.softmax(d, 2).unwrap();
        let m = t.mean(s).unwrap();
        let g = t.backward(m).unwrap();
        g.get(wv).unwrap().clone()
    };
    assert_eq!(run(), run());
}

#[test]
fn dropout_eval_identity_and_train_unbiased() {
    let mut t = Tape::new();
    let x = t.constant(Tensor::vector(vec![2.0; 20_000])).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let same = t.dropout(x, 0.3, &mut rng, false).unwrap();
    assert_eq!(same, x);
    let y = t.dropout(x, 0.3, &mut rng, true).unwrap();
    let v = t.value(y).data();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    // Per-entry variance of inverted dropout: x² · rate / (1 - rate).
    let sigma = (4.0 * 0.3 / 0.7 / n).sqrt();
    assert!((mean - 2.0).abs() < 3.0 * sigma, "mean {mean}, 3σ {}", 3.0 * sigma);
    let zeros = v.iter().filter(|&&x| x == 0.0).count() as f64 / n;
    assert!((zeros - 0.3).abs() < 0.02);
}

#[test]
fn constants_receive_no_gradient() {
    let mut t = Tape::new();
    let a = t.constant(Tensor::vector(vec![1.0, 2.0])).unwrap();
    let b = t.param(Tensor::vector(vec![3.0, 4.0])).unwrap();
    let y = t.mul(a, b).unwrap();
    let m = t.mean(y).unwrap();
    let g = t.backward(m).unwrap();
    assert!(g.get(a).is_none());
    assert_eq!(g.get(b).unwrap().data(), &[0.5, 1.0]);
}
