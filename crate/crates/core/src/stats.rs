//! Small numerical helpers shared across modules.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance (denominator `n - 1`); zero for fewer than two points.
pub fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// Population variance (denominator `n`).
pub fn population_variance(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64
}

pub fn std_dev(x: &[f64]) -> f64 {
    variance(x).sqrt()
}

/// Linear-interpolation quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Sample autocorrelations `r_1..=r_max_lag` using the biased estimator.
/// A constant series yields all zeros.
pub fn autocorrelations(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let m = mean(x);
    let denom: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    (1..=max_lag)
        .map(|k| {
            if denom <= f64::EPSILON * n as f64 * m.abs().max(1.0) || k >= n {
                return 0.0;
            }
            let num: f64 = (0..n - k).map(|t| (x[t] - m) * (x[t + k] - m)).sum();
            num / denom
        })
        .collect()
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Ordinary least squares `argmin ||X b - y||²` via the normal equations.
///
/// Falls back to a ridge penalty of `1e-8` when `XᵀX` is not positive
/// definite; the boolean reports whether the fallback was used.
pub fn least_squares(x: &DMatrix<f64>, y: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let xtx = x.transpose() * x;
    let xty = x.transpose() * y;
    if let Some(chol) = xtx.clone().cholesky() {
        let sol = chol.solve(&xty);
        if sol.iter().all(|v| v.is_finite()) {
            return (sol, false);
        }
    }
    let k = xtx.nrows();
    let ridged = xtx + DMatrix::identity(k, k) * 1e-8;
    let sol = match ridged.clone().cholesky() {
        Some(chol) => chol.solve(&xty),
        None => ridged
            .svd(true, true)
            .solve(&xty, 1e-12)
            .unwrap_or_else(|_| DMatrix::zeros(k, y.ncols())),
    };
    (sol, true)
}

/// Minimum-norm least squares through an SVD; tolerant of rank deficiency.
pub fn least_squares_svd(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let svd = x.clone().svd(true, true);
    let tol = svd.singular_values.max() * 1e-12 * x.nrows().max(x.ncols()) as f64;
    svd.solve(y, tol).unwrap_or_else(|_| DVector::zeros(x.ncols()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_moments() {
        let x = [1.0, 2.0, 3.0];
        assert_eq!(mean(&x), 2.0);
        assert_eq!(variance(&x), 1.0);
        assert_eq!(median(&[3.0, 1.0, 100.0]), 3.0);
        assert_eq!(quantile_sorted(&[0.0, 10.0], 0.25), 2.5);
    }

    #[test]
    fn constant_acf_is_zero() {
        assert!(autocorrelations(&[5.0; 20], 4).iter().all(|&r| r == 0.0));
    }

    #[test]
    fn normal_quantiles() {
        assert!((normal_quantile(0.95) - 1.6448536269514722).abs() < 1e-9);
        assert!(normal_quantile(0.5).abs() < 1e-12);
        assert!((normal_cdf(1.96) - 0.9750021048517795).abs() < 1e-9);
    }

    #[test]
    fn ols_exact_line() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let y = DMatrix::from_row_slice(3, 1, &[1.0, 3.0, 5.0]);
        let (b, ridge) = least_squares(&x, &y);
        assert!(!ridge);
        assert!((b[0] - 1.0).abs() < 1e-12 && (b[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ols_singular_uses_ridge() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let y = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        let (b, ridge) = least_squares(&x, &y);
        assert!(ridge);
        assert!((b[0] + b[1] - 1.0).abs() < 1e-6);
    }
}
