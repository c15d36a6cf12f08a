//! Plain SGD with classical momentum.

use alloc::format;

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Step size, step/epoch budget, and momentum for one optimization loop.
///
/// `steps` is interpreted by the consumer: full-matrix steps for the classifier
/// construction, epochs for loops that take an explicit epoch count.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub steps: usize,
    pub momentum: f64,
}

impl SgdConfig {
    pub fn new(learning_rate: f64, steps: usize, momentum: f64) -> Result<Self> {
        let cfg = SgdConfig { learning_rate, steps, momentum };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        // 0 is allowed and means "updates disabled"; several contracts rely on
        // lr = 0 being an exact no-op.
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Validation(format!(
                "learning rate must be nonnegative and finite, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Validation(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        Ok(())
    }
}

impl Default for SgdConfig {
    /// Momentum defaults to 0: the update is exactly `params - lr * grads`.
    fn default() -> Self {
        SgdConfig { learning_rate: 0.01, steps: 1, momentum: 0.0 }
    }
}

/// One momentum-SGD step: `v <- momentum * v + g`, `p <- p - lr * v`.
pub fn sgd_step(
    params: &Matrix,
    grads: &Matrix,
    cfg: &SgdConfig,
    velocity: &Matrix,
) -> Result<(Matrix, Matrix)> {
    if params.shape() != grads.shape() || params.shape() != velocity.shape() {
        return Err(Error::dim(format!(
            "sgd_step shapes: params {:?}, grads {:?}, velocity {:?}",
            params.shape(),
            grads.shape(),
            velocity.shape()
        )));
    }
    let mut p = params.clone();
    let mut v = velocity.clone();
    sgd_step_in_place(&mut p, grads, cfg, &mut v);
    Ok((p, v))
}

/// In-place variant for hot loops; shapes must already agree.
pub fn sgd_step_in_place(params: &mut Matrix, grads: &Matrix, cfg: &SgdConfig, velocity: &mut Matrix) {
    debug_assert_eq!(params.shape(), grads.shape());
    debug_assert_eq!(params.shape(), velocity.shape());
    let lr = cfg.learning_rate;
    let m = cfg.momentum;
    let g = grads.data();
    let v = velocity.data_mut();
    if m == 0.0 {
        v.copy_from_slice(g);
    } else {
        for (vi, gi) in v.iter_mut().zip(g) {
            *vi = m * *vi + gi;
        }
    }
    let p = params.data_mut();
    for (pi, vi) in p.iter_mut().zip(velocity.data()) {
        *pi -= lr * vi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_vec(1, 1, alloc::vec![v]).unwrap()
    }

    #[test]
    fn plain_step_is_params_minus_lr_grads() {
        let cfg = SgdConfig::new(0.5, 1, 0.0).unwrap();
        let (p, _) = sgd_step(&scalar(1.0), &scalar(2.0), &cfg, &scalar(0.0)).unwrap();
        assert_eq!(p.get(0, 0), 0.0);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        for momentum in [0.0, 0.5, 0.9] {
            let cfg = SgdConfig::new(3.0, 1, momentum).unwrap();
            let p0 = Matrix::from_vec(2, 2, alloc::vec![1.0, -2.0, 3.0, 4.0]).unwrap();
            let (p, v) = sgd_step(&p0, &Matrix::zeros(2, 2), &cfg, &Matrix::zeros(2, 2)).unwrap();
            assert!(p.bits_eq(&p0), "momentum {momentum}");
            assert!(v.bits_eq(&Matrix::zeros(2, 2)));
        }
    }

    #[test]
    fn momentum_matches_hand_expanded_recurrence() {
        // v1 = 0.9*0 + 2 = 2,   p1 = 1 - 0.5*2   = 0
        // v2 = 0.9*2 + 2 = 3.8, p2 = 0 - 0.5*3.8 = -1.9
        let cfg = SgdConfig::new(0.5, 1, 0.9).unwrap();
        let g = scalar(2.0);
        let (p1, v1) = sgd_step(&scalar(1.0), &g, &cfg, &scalar(0.0)).unwrap();
        assert_eq!((p1.get(0, 0), v1.get(0, 0)), (0.0, 2.0));
        let (p2, v2) = sgd_step(&p1, &g, &cfg, &v1).unwrap();
        assert_eq!((p2.get(0, 0), v2.get(0, 0)), (-1.9, 3.8));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let cfg = SgdConfig::default();
        let err = sgd_step(&Matrix::zeros(2, 2), &Matrix::zeros(2, 3), &cfg, &Matrix::zeros(2, 2));
        assert!(matches!(err, Err(crate::Error::Dimension(_))));
    }

    #[test]
    fn config_validation() {
        assert!(SgdConfig::new(0.0, 1, 0.0).is_ok());
        assert!(SgdConfig::new(-1.0, 1, 0.0).is_err());
        assert!(SgdConfig::new(f64::NAN, 1, 0.0).is_err());
        assert!(SgdConfig::new(0.1, 1, 1.0).is_err());
        assert!(SgdConfig::new(0.1, 1, 0.99).is_ok());
    }
}
