//! Central-difference gradient oracle.
//!
//! Used throughout the test suites to certify analytic gradients; kept in the
//! library proper so integration tests and downstream checks can share it.

use alloc::string::String;

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Estimates `d loss / d point` entry-wise via `(f(x + h e) - f(x - h e)) / 2h`.
///
/// `h` must be positive; the loss must be finite at every probe point, otherwise
/// a numeric error identifies the offending entry.
pub fn finite_diff_grad<F>(loss_fn: F, point: &Matrix, h: f64) -> Result<Matrix>
where
    F: Fn(&Matrix) -> f64,
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Validation(String::from("finite-difference step must be positive")));
    }
    let mut grad = Matrix::zeros(point.rows(), point.cols());
    let mut probe = point.clone();
    for r in 0..point.rows() {
        for c in 0..point.cols() {
            let orig = point.get(r, c);
            probe.set(r, c, orig + h);
            let plus = loss_fn(&probe);
            probe.set(r, c, orig - h);
            let minus = loss_fn(&probe);
            probe.set(r, c, orig);
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::Numeric {
                    step: r * point.cols() + c,
                    detail: String::from("loss is non-finite at a finite-difference probe point"),
                });
            }
            grad.set(r, c, (plus - minus) / (2.0 * h));
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_derivative() {
        let point = Matrix::from_vec(1, 1, alloc::vec![3.0]).unwrap();
        let grad = finite_diff_grad(|m| m.get(0, 0) * m.get(0, 0), &point, 1e-5).unwrap();
        assert!((grad.get(0, 0) - 6.0).abs() < 1e-6);
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let point = Matrix::from_vec(2, 2, alloc::vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let grad = finite_diff_grad(|_| 42.0, &point, 1e-5).unwrap();
        assert!(grad.bits_eq(&Matrix::zeros(2, 2)));
    }

    #[test]
    fn euclidean_norm_gradient() {
        let point = Matrix::from_vec(1, 2, alloc::vec![3.0, 4.0]).unwrap();
        let grad = finite_diff_grad(
            |m| m.data().iter().map(|v| v * v).sum::<f64>().sqrt(),
            &point,
            1e-5,
        )
        .unwrap();
        assert!((grad.get(0, 0) - 0.6).abs() < 1e-5);
        assert!((grad.get(0, 1) - 0.8).abs() < 1e-5);
    }

    #[test]
    fn non_finite_probe_is_reported() {
        let point = Matrix::from_vec(1, 1, alloc::vec![0.0]).unwrap();
        let res = finite_diff_grad(|m| 1.0 / m.get(0, 0), &point, 1e-5);
        // f(0 +/- h) is finite here, so try a genuinely exploding function.
        assert!(res.is_ok());
        let res = finite_diff_grad(|m| (1.0 / (m.get(0, 0) - 1e-5)).ln(), &point, 1e-5);
        assert!(matches!(res, Err(Error::Numeric { .. })));
    }
}
