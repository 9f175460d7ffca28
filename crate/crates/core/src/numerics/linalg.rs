//! Small symmetric positive-definite solves for the regression baselines.

use super::Matrix;
use crate::error::{Error, Result};

/// Solves `a · x = b` for symmetric positive-definite `a` by Cholesky
/// factorization. Returns `None` when `a` is not numerically positive definite.
pub fn cholesky_solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.rows();
    debug_assert_eq!(a.cols(), n);
    debug_assert_eq!(b.len(), n);
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        // relative pivot floor catches rank deficiency that survives rounding
        if !(d > 1e-12 * a.get(j, j).abs().max(1e-300)) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l.set(j, j, d);
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / d);
        }
    }
    // forward then backward substitution
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    Some(x)
}

/// Cholesky solve that retries with `ridge · I` added when `a` is singular.
pub fn solve_spd_with_ridge(a: &Matrix, b: &[f64], ridge: f64) -> Result<Vec<f64>> {
    if let Some(x) = cholesky_solve(a, b) {
        return Ok(x);
    }
    let mut reg = a.clone();
    let scale = (0..a.rows()).map(|i| a.get(i, i).abs()).fold(1.0, f64::max);
    for i in 0..a.rows() {
        reg.set(i, i, a.get(i, i) + ridge * scale);
    }
    cholesky_solve(&reg, b).ok_or_else(|| Error::NonFinite("ridge-regularized normal equations".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = Matrix::from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let x = cholesky_solve(&a, &[1.0, 2.0]).unwrap();
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-12);
        assert!((x[0] + 3.0 * x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn singular_falls_back_to_ridge() {
        let a = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(cholesky_solve(&a, &[1.0, 1.0]).is_none());
        let x = solve_spd_with_ridge(&a, &[1.0, 1.0], 1e-6).unwrap();
        assert!((x[0] + x[1] - 1.0).abs() < 1e-4);
    }
}
