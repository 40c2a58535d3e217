//! MacKinnon response surfaces for the constant-only Dickey–Fuller
//! t-statistic with a single I(1) series.

use statrs::distribution::{ContinuousCDF, Normal};

const TAU_STAR: f64 = -1.61;
const TAU_MIN: f64 = -18.83;
const TAU_MAX: f64 = 2.74;
const SMALL_P: [f64; 3] = [2.1659, 1.4412, 3.8269e-2];
const LARGE_P: [f64; 4] = [1.7339, 9.3202e-1, -1.2745e-1, -1.0368e-2];

/// 1%, 5% and 10% rows: critical value = c0 + c1/n + c2/n² + c3/n³.
const CRIT: [[f64; 4]; 3] = [
    [-3.43035, -6.5393, -16.786, -79.433],
    [-2.86154, -2.8903, -4.234, -40.040],
    [-2.56677, -1.5384, -2.809, 0.0],
];

fn poly(coefs: &[f64], x: f64) -> f64 {
    coefs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Approximate asymptotic p-value of an ADF statistic.
pub fn p_value(stat: f64) -> f64 {
    if stat > TAU_MAX {
        return 1.0;
    }
    if stat < TAU_MIN {
        return 0.0;
    }
    let z = if stat <= TAU_STAR { poly(&SMALL_P, stat) } else { poly(&LARGE_P, stat) };
    Normal::standard().cdf(z)
}

/// Finite-sample critical values at the 1%, 5% and 10% levels.
pub fn critical_values(nobs: usize) -> [f64; 3] {
    let inv = 1.0 / nobs as f64;
    CRIT.map(|row| poly(&row, inv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_values_for_reported_sample_size() {
        let cv = critical_values(3484);
        assert!((cv[0] - (-3.43223)).abs() < 5e-6);
        assert!((cv[1] - (-2.86237)).abs() < 5e-6);
        assert!((cv[2] - (-2.56721)).abs() < 5e-6);
    }

    #[test]
    fn p_value_is_monotone_and_bounded() {
        let mut prev = 0.0;
        for i in 0..400 {
            let s = -20.0 + i as f64 * 0.06;
            let p = p_value(s);
            assert!((0.0..=1.0).contains(&p));
            assert!(p >= prev);
            prev = p;
        }
        assert_eq!(p_value(3.0), 1.0);
        assert_eq!(p_value(-19.0), 0.0);
    }
}
