//! Equal-norm and max-min-angle losses with their analytic gradients.

use alloc::format;
use alloc::vec::Vec;

use super::{ClassifierMatrix, SparseMask, SsecConfig};
use crate::error::{Error, Result};
use crate::numerics::fmath;
use crate::numerics::Matrix;

fn check_shapes(w: &Matrix, mask: &SparseMask) -> Result<()> {
    if w.shape() != (mask.rows(), mask.cols()) {
        return Err(Error::dim(format!(
            "classifier {:?} vs mask {}x{}",
            w.shape(),
            mask.rows(),
            mask.cols()
        )));
    }
    Ok(())
}

/// Masked column norms; the mask is applied here so callers may pass matrices
/// with arbitrary values at masked positions.
fn masked_norms(w: &Matrix, mask: &SparseMask) -> Vec<f64> {
    let (d, c) = w.shape();
    let mut sq = alloc::vec![0.0; c];
    for r in 0..d {
        let row = w.row(r);
        for (j, v) in row.iter().enumerate() {
            if mask.is_kept(r, j) {
                sq[j] += v * v;
            }
        }
    }
    sq.into_iter().map(fmath::sqrt).collect()
}

/// Unit-normalized masked columns plus their Gram matrix of pairwise cosines.
fn masked_unit_gram(w: &Matrix, mask: &SparseMask) -> Result<(Matrix, Vec<f64>, Matrix)> {
    let norms = masked_norms(w, mask);
    if let Some(class) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::DegenerateVector { class });
    }
    let (d, c) = w.shape();
    let unit = Matrix::from_fn(d, c, |r, j| {
        if mask.is_kept(r, j) {
            w.get(r, j) / norms[j]
        } else {
            0.0
        }
    });
    let gram = unit.transpose().matmul(&unit)?;
    Ok((unit, norms, gram))
}

/// For each column, the largest cosine against any other column and which
/// column attains it; ties resolved to the lowest index.
fn max_cosines(gram: &Matrix) -> Vec<(usize, f64)> {
    let c = gram.cols();
    (0..c)
        .map(|i| {
            let mut best = (usize::MAX, f64::NEG_INFINITY);
            for j in 0..c {
                if j != i && gram.get(i, j) > best.1 {
                    best = (j, gram.get(i, j));
                }
            }
            best
        })
        .collect()
}

pub(super) fn norm_loss_raw(w: &Matrix, gamma: f64, mask: &SparseMask) -> f64 {
    masked_norms(w, mask)
        .iter()
        .map(|n| (n - gamma) * (n - gamma))
        .sum()
}

pub(super) fn angle_loss_raw(w: &Matrix, mask: &SparseMask, eps: f64) -> Result<f64> {
    let (_, _, gram) = masked_unit_gram(w, mask)?;
    let c = w.cols() as f64;
    let sum: f64 = max_cosines(&gram)
        .iter()
        .map(|&(_, m)| fmath::acos(m.clamp(-1.0 + eps, 1.0 - eps)))
        .sum();
    Ok(-sum / c)
}

pub(super) fn ssec_loss_raw(w: &Matrix, cfg: &SsecConfig, mask: &SparseMask) -> Result<f64> {
    Ok(norm_loss_raw(w, cfg.gamma, mask)
        + cfg.angle_weight * angle_loss_raw(w, mask, cfg.cosine_clamp)?)
}

/// Gradient of the combined loss with respect to the classifier entries.
/// Masked entries receive exactly zero gradient; the angle term flows only
/// through each column's arg-max cosine partner, and cosines sitting at the
/// clamp boundary contribute nothing.
pub(super) fn ssec_grad_raw(w: &Matrix, cfg: &SsecConfig, mask: &SparseMask) -> Result<Matrix> {
    let (unit, norms, gram) = masked_unit_gram(w, mask)?;
    let (d, c) = w.shape();
    let mut grad = Matrix::zeros(d, c);

    // Equal-norm term: 2 (|w_i| - gamma) * w_i / |w_i| per column.
    for (i, &n) in norms.iter().enumerate() {
        let coef = 2.0 * (n - cfg.gamma);
        if coef != 0.0 {
            for r in 0..d {
                let u = unit.get(r, i);
                if u != 0.0 {
                    grad.set(r, i, grad.get(r, i) + coef * u);
                }
            }
        }
    }

    // Angle term: d/dw of -(1/C) sum_i acos(max_j cos_ij). Each term touches
    // the pair (i, j*); d acos(m)/dm = -1/sqrt(1-m^2) flips the sign.
    if cfg.angle_weight > 0.0 {
        let eps = cfg.cosine_clamp;
        let scale = cfg.angle_weight / c as f64;
        for (i, &(j, m)) in max_cosines(&gram).iter().enumerate() {
            if m >= 1.0 - eps || m <= -1.0 + eps {
                continue;
            }
            let kappa = scale / fmath::sqrt(1.0 - m * m);
            for r in 0..d {
                let ui = unit.get(r, i);
                let uj = unit.get(r, j);
                grad.set(r, i, grad.get(r, i) + kappa * (uj - m * ui) / norms[i]);
                grad.set(r, j, grad.get(r, j) + kappa * (ui - m * uj) / norms[j]);
            }
        }
    }

    mask.zero_in_place(&mut grad);
    Ok(grad)
}

/// Equal-norm loss: `sum_i (|psi'_i ⊙ S_i| - gamma)^2`.
pub fn norm_loss(psi: &ClassifierMatrix, gamma: f64, mask: &SparseMask) -> Result<f64> {
    check_shapes(psi.weights(), mask)?;
    Ok(norm_loss_raw(psi.weights(), gamma, mask))
}

/// Max-min-angle loss: columns are normalized, each takes the arc-cosine of its
/// largest pairwise cosine (clamped away from ±1), and the mean is negated, so
/// more negative means larger minimum angles.
pub fn angle_loss(psi: &ClassifierMatrix, mask: &SparseMask, eps: f64) -> Result<f64> {
    check_shapes(psi.weights(), mask)?;
    angle_loss_raw(psi.weights(), mask, eps)
}

/// Combined construction loss: equal-norm plus (weighted) max-min-angle.
pub fn ssec_loss(psi: &ClassifierMatrix, cfg: &SsecConfig, mask: &SparseMask) -> Result<f64> {
    check_shapes(psi.weights(), mask)?;
    ssec_loss_raw(psi.weights(), cfg, mask)
}

/// Analytic gradient of [`ssec_loss`]; see `ssec_grad_raw` for the contract.
pub fn ssec_grad(psi: &ClassifierMatrix, cfg: &SsecConfig, mask: &SparseMask) -> Result<Matrix> {
    check_shapes(psi.weights(), mask)?;
    ssec_grad_raw(psi.weights(), cfg, mask)
}
