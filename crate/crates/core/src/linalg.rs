//! Dense least squares by Householder QR, shared by the ADF regression and
//! the AR fit.

/// Ordinary least squares fit of `y` on the columns of a row-major design.
#[derive(Debug, Clone)]
pub(crate) struct OlsFit {
    pub coef: Vec<f64>,
    pub std_err: Vec<f64>,
    pub ssr: f64,
    pub nobs: usize,
}

impl OlsFit {
    /// Gaussian log-likelihood AIC with one parameter per regressor,
    /// `n·(ln 2π + ln(ssr/n) + 1) + 2k`.
    pub fn aic(&self) -> f64 {
        let n = self.nobs as f64;
        let k = self.coef.len() as f64;
        n * ((2.0 * std::f64::consts::PI).ln() + (self.ssr / n).ln() + 1.0) + 2.0 * k
    }
}

/// Returns `None` when the design is rank deficient or has no residual
/// degrees of freedom.
pub(crate) fn ols(x: &[f64], nobs: usize, k: usize, y: &[f64]) -> Option<OlsFit> {
    debug_assert_eq!(x.len(), nobs * k);
    debug_assert_eq!(y.len(), nobs);
    if nobs <= k || k == 0 {
        return None;
    }
    // Column-major copy so each Householder reflection works on contiguous memory.
    let mut a: Vec<f64> = (0..k).flat_map(|j| (0..nobs).map(move |i| x[i * k + j])).collect();
    let mut b = y.to_vec();
    let mut diag = vec![0.0; k];
    let scale = (0..k)
        .map(|j| a[j * nobs..(j + 1) * nobs].iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0_f64, f64::max);
    if scale == 0.0 {
        return None;
    }
    for j in 0..k {
        let col = j * nobs;
        let norm = a[col + j..col + nobs].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-12 * scale {
            return None;
        }
        let alpha = if a[col + j] > 0.0 { -norm } else { norm };
        a[col + j] -= alpha;
        let vnorm2 = a[col + j..col + nobs].iter().map(|v| v * v).sum::<f64>();
        diag[j] = alpha;
        if vnorm2 == 0.0 {
            continue;
        }
        for jj in j + 1..k {
            let c2 = jj * nobs;
            let dot: f64 = (j..nobs).map(|i| a[col + i] * a[c2 + i]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in j..nobs {
                a[c2 + i] -= f * a[col + i];
            }
        }
        let dot: f64 = (j..nobs).map(|i| a[col + i] * b[i]).sum();
        let f = 2.0 * dot / vnorm2;
        for i in j..nobs {
            b[i] -= f * a[col + i];
        }
    }
    // R is upper triangular: diag on the diagonal, a[jj*nobs + j] above it.
    let r = |i: usize, j: usize| if i == j { diag[i] } else { a[j * nobs + i] };
    let mut coef = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|j| r(i, j) * coef[j]).sum();
        coef[i] = (b[i] - s) / r(i, i);
    }
    let ssr: f64 = b[k..].iter().map(|v| v * v).sum();
    // (X'X)^{-1} = R^{-1} R^{-T}; diag_i = sum_j (R^{-1})_{ij}^2.
    let mut rinv = vec![0.0; k * k];
    for c in 0..k {
        for i in (0..=c).rev() {
            let rhs = if i == c { 1.0 } else { 0.0 };
            let s: f64 = (i + 1..=c).map(|j| r(i, j) * rinv[j * k + c]).sum();
            rinv[i * k + c] = (rhs - s) / r(i, i);
        }
    }
    let sigma2 = ssr / (nobs - k) as f64;
    let std_err = (0..k)
        .map(|i| ((0..k).map(|j| rinv[i * k + j].powi(2)).sum::<f64>() * sigma2).sqrt())
        .collect();
    Some(OlsFit { coef, std_err, ssr, nobs })
}
