use super::kernels::{col2im, gemm, im2col, strides};
use super::{AutodiffError, Tensor};
use rand::Rng;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul { a: Var, b: Var, batch: usize, m: usize, k: usize, n: usize, batched_rhs: bool },
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Scale { a: Var, c: f64 },
    Concat { parts: Vec<Var>, axis: usize },
    Slice { a: Var, axis: usize, start: usize },
    Reshape { a: Var },
    Transpose { a: Var },
    Conv1d { x: Var, w: Var, cols: Vec<f64>, k: usize },
    Softmax { a: Var, axis: usize },
    Sigmoid { a: Var },
    Tanh { a: Var },
    Relu { a: Var },
    Dropout { a: Var, mask: Vec<f64> },
    Mean { a: Var },
    Mse { pred: Var, target: Var },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Record of one forward pass. Single use: after [`Tape::backward`] the tape
/// must be [`reset`](Tape::reset) before recording again.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Gradients of a scalar loss, indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient with respect to `v`; `None` if `v` does not depend on any
    /// parameter or does not reach the loss.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Like [`get`](Self::get) but zero-filled for unreachable nodes.
    pub fn wrt(&self, v: Var, shape: &[usize]) -> Tensor {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(shape))
    }
}

fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn mismatch(op: &'static str, got: &[usize], expected: &[usize]) -> AutodiffError {
    AutodiffError::ShapeMismatch { op, got: got.to_vec(), expected: expected.to_vec() }
}

fn accumulate(slot: &mut Option<Vec<f64>>, len: usize) -> &mut Vec<f64> {
    slot.get_or_insert_with(|| vec![0.0; len])
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    /// Drops every recorded node so the tape can record a fresh pass.
    pub fn reset(&mut self) {
        self.nodes.clear();
        self.consumed = false;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, name: &'static str, value: Tensor, op: Op, needs_grad: bool) -> Result<Var, AutodiffError> {
        if self.consumed {
            return Err(AutodiffError::TapeAlreadyConsumed);
        }
        if value.data().iter().any(|v| !v.is_finite()) {
            return Err(AutodiffError::NonFiniteValue(name));
        }
        self.nodes.push(Node { value, op, needs_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Trainable leaf: gradients are accumulated for it.
    pub fn param(&mut self, t: Tensor) -> Result<Var, AutodiffError> {
        self.push("param", t, Op::Leaf, true)
    }

    /// Leaf without gradient (inputs, targets, masks).
    pub fn constant(&mut self, t: Tensor) -> Result<Var, AutodiffError> {
        self.push("constant", t, Op::Leaf, false)
    }

    /// Matrix product over the last two axes.
    ///
    /// `a` of rank ≥ 2 times a rank-2 `b` treats the leading axes of `a` as
    /// rows; rank-3 `a` and `b` multiply batch-wise.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        if sa.len() < 2 {
            return Err(mismatch("matmul", &sa, &[0, 0]));
        }
        let k = sa[sa.len() - 1];
        let (batch, m, n, batched_rhs, out_shape) = match sb.len() {
            2 => {
                if sb[0] != k {
                    return Err(mismatch("matmul", &sb, &[k, sb[1]]));
                }
                let mut out = sa[..sa.len() - 1].to_vec();
                out.push(sb[1]);
                (1, sa[..sa.len() - 1].iter().product(), sb[1], false, out)
            }
            3 if sa.len() == 3 => {
                if sb[0] != sa[0] || sb[1] != k {
                    return Err(mismatch("matmul", &sb, &[sa[0], k, sb[2]]));
                }
                (sa[0], sa[1], sb[2], true, vec![sa[0], sa[1], sb[2]])
            }
            _ => return Err(mismatch("matmul", &sb, &[k, 0])),
        };
        let mut out = vec![0.0; batch * m * n];
        {
            let av = self.value(a).data();
            let bv = self.value(b).data();
            for bi in 0..batch {
                let b_off = if batched_rhs { bi * k * n } else { 0 };
                gemm(
                    m,
                    k,
                    n,
                    &av[bi * m * k..(bi + 1) * m * k],
                    strides(k, false),
                    &bv[b_off..b_off + k * n],
                    strides(n, false),
                    &mut out[bi * m * n..(bi + 1) * m * n],
                    0.0,
                );
            }
        }
        let needs = self.needs(a) || self.needs(b);
        self.push(
            "matmul",
            Tensor::from_parts(out_shape, out),
            Op::MatMul { a, b, batch, m, k, n, batched_rhs },
            needs,
        )
    }

    /// Elementwise sum; `b` may also match a suffix of `a`'s shape, in which
    /// case it is broadcast over `a`'s leading axes (bias add).
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let sa = self.shape(a);
        let sb = self.shape(b);
        if sb.len() > sa.len() || sa[sa.len() - sb.len()..] != *sb {
            return Err(mismatch("add", sb, sa));
        }
        let bv = self.value(b).data();
        let nb = bv.len();
        let data: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .enumerate()
            .map(|(i, x)| x + bv[i % nb])
            .collect();
        let shape = sa.to_vec();
        let needs = self.needs(a) || self.needs(b);
        self.push("add", Tensor::from_parts(shape, data), Op::Add { a, b }, needs)
    }

    /// Elementwise (Hadamard) product of equally shaped tensors.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        if self.shape(a) != self.shape(b) {
            return Err(mismatch("mul", self.shape(b), self.shape(a)));
        }
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x * y).collect();
        let shape = self.shape(a).to_vec();
        let needs = self.needs(a) || self.needs(b);
        self.push("mul", Tensor::from_parts(shape, data), Op::Mul { a, b }, needs)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var, AutodiffError> {
        let data = self.value(a).data().iter().map(|x| x * c).collect();
        let shape = self.shape(a).to_vec();
        let needs = self.needs(a);
        self.push("scale", Tensor::from_parts(shape, data), Op::Scale { a, c }, needs)
    }

    /// Joins tensors along `axis`; all other extents must agree.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var, AutodiffError> {
        let first = parts.first().ok_or_else(|| AutodiffError::InvalidArgument {
            op: "concat",
            reason: "no inputs".into(),
        })?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(AutodiffError::InvalidArgument { op: "concat", reason: format!("axis {axis} out of range") });
        }
        let mut total = 0;
        for &p in parts {
            let s = self.shape(p);
            let same_rest = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(i, (x, y))| i == axis || x == y);
            if !same_rest {
                return Err(mismatch("concat", s, &base));
            }
            total += s[axis];
        }
        let (outer, _, inner) = split_axis(&base, axis);
        let mut shape = base.clone();
        shape[axis] = total;
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &p in parts {
                let len = self.shape(p)[axis] * inner;
                data.extend_from_slice(&self.value(p).data()[o * len..(o + 1) * len]);
            }
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        self.push("concat", Tensor::from_parts(shape, data), Op::Concat { parts: parts.to_vec(), axis }, needs)
    }

    /// `len` entries of `axis` starting at `start`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var, AutodiffError> {
        let s = self.shape(a).to_vec();
        if axis >= s.len() || len == 0 || start + len > s[axis] {
            return Err(AutodiffError::InvalidArgument {
                op: "slice",
                reason: format!("axis {axis} range {start}..{} of shape {s:?}", start + len),
            });
        }
        let (outer, full, inner) = split_axis(&s, axis);
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * full + start) * inner;
            data.extend_from_slice(&src[base..base + len * inner]);
        }
        let mut shape = s;
        shape[axis] = len;
        let needs = self.needs(a);
        self.push("slice", Tensor::from_parts(shape, data), Op::Slice { a, axis, start }, needs)
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, AutodiffError> {
        let n: usize = shape.iter().product();
        if n != self.value(a).len() || shape.contains(&0) {
            return Err(mismatch("reshape", shape, self.shape(a)));
        }
        let data = self.value(a).data().to_vec();
        let needs = self.needs(a);
        self.push("reshape", Tensor::from_parts(shape.to_vec(), data), Op::Reshape { a }, needs)
    }

    /// Swaps the last two axes.
    pub fn transpose(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let s = self.shape(a).to_vec();
        if s.len() < 2 {
            return Err(mismatch("transpose", &s, &[0, 0]));
        }
        let (r, c) = (s[s.len() - 2], s[s.len() - 1]);
        let batch = self.value(a).len() / (r * c);
        let src = self.value(a).data();
        let mut data = vec![0.0; src.len()];
        for b in 0..batch {
            for i in 0..r {
                for j in 0..c {
                    data[b * r * c + j * r + i] = src[b * r * c + i * c + j];
                }
            }
        }
        let mut shape = s;
        let l = shape.len();
        shape.swap(l - 2, l - 1);
        let needs = self.needs(a);
        self.push("transpose", Tensor::from_parts(shape, data), Op::Transpose { a }, needs)
    }

    /// 1-D convolution along the time axis with stride 1 and zero "same"
    /// padding. `x` is `batch × time × in`, `w` is `kernel × in × out`.
    pub fn conv1d(&mut self, x: Var, w: Var) -> Result<Var, AutodiffError> {
        let sx = self.shape(x).to_vec();
        let sw = self.shape(w).to_vec();
        if sx.len() != 3 {
            return Err(mismatch("conv1d", &sx, &[0, 0, 0]));
        }
        if sw.len() != 3 || sw[1] != sx[2] {
            return Err(mismatch("conv1d", &sw, &[0, sx[2], 0]));
        }
        let (b, t, c) = (sx[0], sx[1], sx[2]);
        let (k, o) = (sw[0], sw[2]);
        let cols = im2col(self.value(x).data(), b, t, c, k);
        let mut out = vec![0.0; b * t * o];
        gemm(b * t, k * c, o, &cols, strides(k * c, false), self.value(w).data(), strides(o, false), &mut out, 0.0);
        let needs = self.needs(x) || self.needs(w);
        self.push("conv1d", Tensor::from_parts(vec![b, t, o], out), Op::Conv1d { x, w, cols, k }, needs)
    }

    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var, AutodiffError> {
        let s = self.shape(a).to_vec();
        if axis >= s.len() {
            return Err(AutodiffError::InvalidArgument { op: "softmax", reason: format!("axis {axis} out of range") });
        }
        let (outer, len, inner) = split_axis(&s, axis);
        let src = self.value(a).data();
        let mut data = vec![0.0; src.len()];
        for o in 0..outer {
            for i in 0..inner {
                let idx = |j: usize| (o * len + j) * inner + i;
                let max = (0..len).map(|j| src[idx(j)]).fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for j in 0..len {
                    let e = (src[idx(j)] - max).exp();
                    data[idx(j)] = e;
                    z += e;
                }
                for j in 0..len {
                    data[idx(j)] /= z;
                }
            }
        }
        let needs = self.needs(a);
        self.push("softmax", Tensor::from_parts(s, data), Op::Softmax { a, axis }, needs)
    }

    fn unary(&mut self, name: &'static str, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Result<Var, AutodiffError> {
        let data = self.value(a).data().iter().map(|&x| f(x)).collect();
        let shape = self.shape(a).to_vec();
        let needs = self.needs(a);
        self.push(name, Tensor::from_parts(shape, data), op, needs)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.unary("sigmoid", a, |x| 1.0 / (1.0 + (-x).exp()), Op::Sigmoid { a })
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.unary("tanh", a, f64::tanh, Op::Tanh { a })
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.unary("relu", a, |x| x.max(0.0), Op::Relu { a })
    }

    /// Inverted dropout. With `train == false` or `rate == 0` this is the
    /// identity and records nothing.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        a: Var,
        rate: f64,
        rng: &mut R,
        train: bool,
    ) -> Result<Var, AutodiffError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(AutodiffError::InvalidArgument { op: "dropout", reason: format!("rate {rate} not in [0, 1)") });
        }
        if !train || rate == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 / (1.0 - rate);
        let mask: Vec<f64> = (0..self.value(a).len())
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let data = self.value(a).data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        let shape = self.shape(a).to_vec();
        let needs = self.needs(a);
        self.push("dropout", Tensor::from_parts(shape, data), Op::Dropout { a, mask }, needs)
    }

    /// Mean of all entries, as a one-element tensor.
    pub fn mean(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let v = self.value(a).data();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let needs = self.needs(a);
        self.push("mean", Tensor::scalar(m), Op::Mean { a }, needs)
    }

    /// Mean squared error between equally shaped tensors.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var, AutodiffError> {
        if self.shape(pred) != self.shape(target) {
            return Err(mismatch("mse_loss", self.shape(target), self.shape(pred)));
        }
        let p = self.value(pred).data();
        let t = self.value(target).data();
        let m = p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len() as f64;
        let needs = self.needs(pred) || self.needs(target);
        self.push("mse_loss", Tensor::scalar(m), Op::Mse { pred, target }, needs)
    }

    /// Reverse accumulation from a scalar `loss`. Consumes the tape.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients, AutodiffError> {
        if self.consumed {
            return Err(AutodiffError::TapeAlreadyConsumed);
        }
        if self.nodes.is_empty() {
            return Err(AutodiffError::InvalidArgument { op: "backward", reason: "empty tape".into() });
        }
        if !self.value(loss).is_scalar() {
            return Err(AutodiffError::NonScalarLoss(self.shape(loss).to_vec()));
        }
        self.consumed = true;
        let nodes = &self.nodes;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let node = &nodes[i];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let need = |v: Var| nodes[v.0].needs_grad;
            let val = |v: Var| nodes[v.0].value.data();
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul { a, b, batch, m, k, n, batched_rhs } => {
                    let (batch, m, k, n) = (*batch, *m, *k, *n);
                    let (av, bv) = (val(*a), val(*b));
                    if need(*a) {
                        let ga = accumulate(&mut grads[a.0], batch * m * k);
                        for bi in 0..batch {
                            let b_off = if *batched_rhs { bi * k * n } else { 0 };
                            gemm(
                                m,
                                n,
                                k,
                                &g[bi * m * n..(bi + 1) * m * n],
                                strides(n, false),
                                &bv[b_off..b_off + k * n],
                                strides(n, true),
                                &mut ga[bi * m * k..(bi + 1) * m * k],
                                1.0,
                            );
                        }
                    }
                    if need(*b) {
                        let gb = accumulate(&mut grads[b.0], if *batched_rhs { batch * k * n } else { k * n });
                        for bi in 0..batch {
                            let b_off = if *batched_rhs { bi * k * n } else { 0 };
                            gemm(
                                k,
                                m,
                                n,
                                &av[bi * m * k..(bi + 1) * m * k],
                                strides(k, true),
                                &g[bi * m * n..(bi + 1) * m * n],
                                strides(n, false),
                                &mut gb[b_off..b_off + k * n],
                                1.0,
                            );
                        }
                    }
                }
                Op::Add { a, b } => {
                    if need(*a) {
                        let ga = accumulate(&mut grads[a.0], g.len());
                        ga.iter_mut().zip(&g).for_each(|(x, y)| *x += y);
                    }
                    if need(*b) {
                        let nb = val(*b).len();
                        let gb = accumulate(&mut grads[b.0], nb);
                        for (j, y) in g.iter().enumerate() {
                            gb[j % nb] += y;
                        }
                    }
                }
                Op::Mul { a, b } => {
                    let (av, bv) = (val(*a), val(*b));
                    if need(*a) {
                        let ga = accumulate(&mut grads[a.0], g.len());
                        for j in 0..g.len() {
                            ga[j] += g[j] * bv[j];
                        }
                    }
                    if need(*b) {
                        let gb = accumulate(&mut grads[b.0], g.len());
                        for j in 0..g.len() {
                            gb[j] += g[j] * av[j];
                        }
                    }
                }
                Op::Scale { a, c } => {
                    let ga = accumulate(&mut grads[a.0], g.len());
                    ga.iter_mut().zip(&g).for_each(|(x, y)| *x += c * y);
                }
                Op::Concat { parts, axis } => {
                    let (outer, _, inner) = split_axis(node.value.shape(), *axis);
                    let total = node.value.shape()[*axis];
                    let mut offset = 0;
                    for &p in parts {
                        let len = nodes[p.0].value.shape()[*axis] * inner;
                        if need(p) {
                            let gp = accumulate(&mut grads[p.0], outer * len);
                            for o in 0..outer {
                                let src = o * total * inner + offset;
                                for j in 0..len {
                                    gp[o * len + j] += g[src + j];
                                }
                            }
                        }
                        offset += len;
                    }
                }
                Op::Slice { a, axis, start } => {
                    let s = nodes[a.0].value.shape();
                    let (outer, full, inner) = split_axis(s, *axis);
                    let len = node.value.shape()[*axis];
                    let ga = accumulate(&mut grads[a.0], outer * full * inner);
                    for o in 0..outer {
                        let base = (o * full + start) * inner;
                        for j in 0..len * inner {
                            ga[base + j] += g[o * len * inner + j];
                        }
                    }
                }
                Op::Reshape { a } => {
                    let ga = accumulate(&mut grads[a.0], g.len());
                    ga.iter_mut().zip(&g).for_each(|(x, y)| *x += y);
                }
                Op::Transpose { a } => {
                    let s = nodes[a.0].value.shape();
                    let (r, c) = (s[s.len() - 2], s[s.len() - 1]);
                    let batch = g.len() / (r * c);
                    let ga = accumulate(&mut grads[a.0], g.len());
                    for b in 0..batch {
                        for i in 0..r {
                            for j in 0..c {
                                ga[b * r * c + i * c + j] += g[b * r * c + j * r + i];
                            }
                        }
                    }
                }
                Op::Conv1d { x, w, cols, k } => {
                    let sx = nodes[x.0].value.shape();
                    let (b, t, c) = (sx[0], sx[1], sx[2]);
                    let o = node.value.shape()[2];
                    let kc = k * c;
                    if need(*w) {
                        let gw = accumulate(&mut grads[w.0], kc * o);
                        gemm(kc, b * t, o, cols, strides(kc, true), &g, strides(o, false), gw, 1.0);
                    }
                    if need(*x) {
                        let mut gcols = vec![0.0; b * t * kc];
                        gemm(b * t, o, kc, &g, strides(o, false), val(*w), strides(o, true), &mut gcols, 0.0);
                        let gx = accumulate(&mut grads[x.0], b * t * c);
                        col2im(&gcols, b, t, c, *k, gx);
                    }
                }
                Op::Softmax { a, axis } => {
                    let y = node.value.data();
                    let (outer, len, inner) = split_axis(node.value.shape(), *axis);
                    let ga = accumulate(&mut grads[a.0], g.len());
                    for o in 0..outer {
                        for i in 0..inner {
                            let idx = |j: usize| (o * len + j) * inner + i;
                            let dot: f64 = (0..len).map(|j| g[idx(j)] * y[idx(j)]).sum();
                            for j in 0..len {
                                ga[idx(j)] += y[idx(j)] * (g[idx(j)] - dot);
                            }
                        }
                    }
                }
                Op::Sigmoid { a } => {
                    let y = node.value.data();
                    let ga = accumulate(&mut grads[a.0], g.len());
                    for j in 0..g.len() {
                        ga[j] += g[j] * y[j] * (1.0 - y[j]);
                    }
                }
                Op::Tanh { a } => {
                    let y = node.value.data();
                    let ga = accumulate(&mut grads[a.0], g.len());
                    for j in 0..g.len() {
                        ga[j] += g[j] * (1.0 - y[j] * y[j]);
                    }
                }
                Op::Relu { a } => {
                    let x = val(*a);
                    let ga = accumulate(&mut grads[a.0], g.len());
                    for j in 0..g.len() {
                        if x[j] > 0.0 {
                            ga[j] += g[j];
                        }
                    }
                }
                Op::Dropout { a, mask } => {
                    let ga = accumulate(&mut grads[a.0], g.len());
                    for j in 0..g.len() {
                        ga[j] += g[j] * mask[j];
                    }
                }
                Op::Mean { a } => {
                    let n = val(*a).len();
                    let ga = accumulate(&mut grads[a.0], n);
                    let d = g[0] / n as f64;
                    ga.iter_mut().for_each(|x| *x += d);
                }
                Op::Mse { pred, target } => {
                    let (p, t) = (val(*pred), val(*target));
                    let scale = 2.0 * g[0] / p.len() as f64;
                    if need(*pred) {
                        let gp = accumulate(&mut grads[pred.0], p.len());
                        for j in 0..p.len() {
                            gp[j] += scale * (p[j] - t[j]);
                        }
                    }
                    if need(*target) {
                        let gt = accumulate(&mut grads[target.0], p.len());
                        for j in 0..p.len() {
                            gt[j] -= scale * (p[j] - t[j]);
                        }
                    }
                }
            }
        }
        let grads = grads
            .into_iter()
            .zip(nodes)
            .map(|(g, node)| match (g, &node.op) {
                (Some(g), Op::Leaf) if node.needs_grad => Some(Tensor::from_parts(node.value.shape().to_vec(), g)),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads })
    }
}
