//! Strided GEMM and im2col helpers.

/// `c = a·b + beta·c` for row-major `c` (`m × n`); `a` and `b` are addressed
/// through explicit row/column strides so transposes need no copy.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (usize, usize),
    b: &[f64],
    b_strides: (usize, usize),
    c: &mut [f64],
    beta: f64,
) {
    assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c[..m * n].iter_mut().for_each(|v| *v *= beta);
        return;
    }
    let last_a = (m - 1) * a_strides.0 + (k - 1) * a_strides.1;
    let last_b = (k - 1) * b_strides.0 + (n - 1) * b_strides.1;
    assert!(last_a < a.len() && last_b < b.len());
    // SAFETY: the asserts above bound every element dgemm reads or writes.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0 as isize,
            a_strides.1 as isize,
            b.as_ptr(),
            b_strides.0 as isize,
            b_strides.1 as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Row-major `rows × cols` strides, optionally transposed.
pub(crate) fn strides(cols: usize, transposed: bool) -> (usize, usize) {
    if transposed {
        (1, cols)
    } else {
        (cols, 1)
    }
}

/// Unfolds `x` (`batch × time × channels`) into `(batch·time) × (k·channels)`
/// patches with zero "same" padding: `pad_left = (k-1)/2`.
pub(crate) fn im2col(x: &[f64], batch: usize, time: usize, ch: usize, k: usize) -> Vec<f64> {
    let left = (k - 1) / 2;
    let width = k * ch;
    let mut cols = vec![0.0; batch * time * width];
    for b in 0..batch {
        for t in 0..time {
            let row = &mut cols[(b * time + t) * width..(b * time + t + 1) * width];
            for j in 0..k {
                let src = t as isize + j as isize - left as isize;
                if src < 0 || src >= time as isize {
                    continue;
                }
                let src = (b * time + src as usize) * ch;
                row[j * ch..(j + 1) * ch].copy_from_slice(&x[src..src + ch]);
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: folds patch gradients back onto the input.
pub(crate) fn col2im(
    cols: &[f64],
    batch: usize,
    time: usize,
    ch: usize,
    k: usize,
    out: &mut [f64],
) {
    let left = (k - 1) / 2;
    let width = k * ch;
    for b in 0..batch {
        for t in 0..time {
            let row = &cols[(b * time + t) * width..(b * time + t + 1) * width];
            for j in 0..k {
                let src = t as isize + j as isize - left as isize;
                if src < 0 || src >= time as isize {
                    continue;
                }
                let dst = (b * time + src as usize) * ch;
                for c in 0..ch {
                    out[dst + c] += row[j * ch + c];
                }
            }
        }
    }
}
