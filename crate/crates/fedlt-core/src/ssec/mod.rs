//! Static sparse equiangular-tight-frame classifier construction.
//!
//! A dense simplex ETF gives `C` unit-norm class vectors with the maximal equal
//! pairwise angle, `cos = -1/(C-1)`. Randomly zeroing a fraction `beta` of its
//! entries destroys both properties, so the sparse classifier is re-optimized
//! under two penalties: an equal-norm loss pulling every masked column norm to
//! a target `gamma`, and a max-min-angle loss pushing apart the closest pair of
//! normalized columns. The optimized matrix is then frozen and used as the
//! shared classifier during federated representation learning.

mod build;
mod loss;

pub use build::{build_ssec, build_ssec_traced};
pub use loss::{angle_loss, norm_loss, ssec_grad, ssec_loss};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::fmath;
use crate::numerics::{Matrix, RngStream, SgdConfig};

/// Which of the pipeline's classifier heads a matrix is acting as.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadRole {
    DenseEtf,
    SseC,
    AuxGlobal,
    Personal,
    Realigned,
}

/// A `d x C` matrix of per-class weight vectors (class vectors are columns).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierMatrix {
    weights: Matrix,
    role: HeadRole,
}

impl ClassifierMatrix {
    pub fn new(weights: Matrix, role: HeadRole) -> Result<Self> {
        if weights.rows() < weights.cols() {
            return Err(Error::dim(format!(
                "classifier needs feature dim >= class count, got {}x{}",
                weights.rows(),
                weights.cols()
            )));
        }
        if !weights.is_finite() {
            return Err(Error::Numeric {
                step: 0,
                detail: "non-finite classifier weights".into(),
            });
        }
        Ok(ClassifierMatrix { weights, role })
    }

    /// Wraps an already-masked matrix as the frozen sparse classifier,
    /// verifying that every masked entry is exactly zero.
    pub fn new_sparse(weights: Matrix, mask: &SparseMask) -> Result<Self> {
        if weights.shape() != (mask.rows(), mask.cols()) {
            return Err(Error::dim(format!(
                "weights {:?} vs mask {}x{}",
                weights.shape(),
                mask.rows(),
                mask.cols()
            )));
        }
        for r in 0..weights.rows() {
            for c in 0..weights.cols() {
                if !mask.is_kept(r, c) && weights.get(r, c) != 0.0 {
                    return Err(Error::Validation(format!(
                        "masked entry ({r}, {c}) is nonzero"
                    )));
                }
            }
        }
        ClassifierMatrix::new(weights, HeadRole::SseC)
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut Matrix {
        &mut self.weights
    }

    pub fn role(&self) -> HeadRole {
        self.role
    }

    /// Feature dimension `d`.
    pub fn dim(&self) -> usize {
        self.weights.rows()
    }

    /// Class count `C`.
    pub fn classes(&self) -> usize {
        self.weights.cols()
    }

    pub fn col_norm(&self, class: usize) -> f64 {
        self.weights.col_norm(class)
    }

    pub fn bits_eq(&self, other: &ClassifierMatrix) -> bool {
        self.role == other.role && self.weights.bits_eq(&other.weights)
    }
}

/// Binary keep/zero indicator with the same shape as the classifier.
///
/// Masking is exact-count per column: every class keeps `round((1-beta) * d)`
/// weights, so no class loses more capacity than another.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMask {
    rows: usize,
    cols: usize,
    keep: Vec<bool>,
    beta: f64,
}

impl SparseMask {
    /// All-ones mask (`beta = 0`), used for dense heads.
    pub fn dense(rows: usize, cols: usize) -> Self {
        SparseMask {
            rows,
            cols,
            keep: vec![true; rows * cols],
            beta: 0.0,
        }
    }

    /// Rebuilds a mask from raw keep flags (row-major), validating that every
    /// column keeps the same nonzero number of entries.
    pub fn from_flags(rows: usize, cols: usize, keep: Vec<bool>) -> Result<Self> {
        if keep.len() != rows * cols {
            return Err(Error::dim(format!(
                "mask flag length {} != {rows}x{cols}",
                keep.len()
            )));
        }
        let mut per_col = vec![0usize; cols];
        for r in 0..rows {
            for c in 0..cols {
                if keep[r * cols + c] {
                    per_col[c] += 1;
                }
            }
        }
        let kept = per_col[0];
        if kept == 0 || per_col.iter().any(|&k| k != kept) {
            return Err(Error::Validation(
                "mask columns must keep the same nonzero entry count".into(),
            ));
        }
        let beta = 1.0 - kept as f64 / rows as f64;
        Ok(SparseMask { rows, cols, keep, beta })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn kept_per_column(&self) -> usize {
        (0..self.rows).filter(|&r| self.keep[r * self.cols]).count()
    }

    #[inline]
    pub fn is_kept(&self, r: usize, c: usize) -> bool {
        self.keep[r * self.cols + c]
    }

    pub fn flags(&self) -> &[bool] {
        &self.keep
    }

    /// Zeroes every masked entry of `m`.
    pub fn apply(&self, m: &Matrix) -> Matrix {
        debug_assert_eq!(m.shape(), (self.rows, self.cols));
        Matrix::from_fn(self.rows, self.cols, |r, c| {
            if self.keep[r * self.cols + c] {
                m.get(r, c)
            } else {
                0.0
            }
        })
    }

    pub(crate) fn zero_in_place(&self, m: &mut Matrix) {
        debug_assert_eq!(m.shape(), (self.rows, self.cols));
        for (v, kept) in m.data_mut().iter_mut().zip(&self.keep) {
            if !kept {
                *v = 0.0;
            }
        }
    }
}

/// Dense simplex ETF: `psi = sqrt(C/(C-1)) * U * (I - 1/C * 1 1^T)` with `U`
/// a random `d x C` orthonormal basis. Columns have unit norm and pairwise
/// cosine `-1/(C-1)`.
pub fn make_dense_etf(d: usize, c: usize, rng: &mut RngStream) -> Result<ClassifierMatrix> {
    let u = crate::numerics::orthonormal_columns(d, c, rng)?;
    let center = Matrix::from_fn(c, c, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - 1.0 / c as f64
    });
    let scale = fmath::sqrt(c as f64 / (c as f64 - 1.0));
    let weights = u.matmul(&center)?.scale(scale);
    ClassifierMatrix::new(weights, HeadRole::DenseEtf)
}

/// Per-column exact-count random mask: each column keeps `round((1-beta) * d)`
/// positions, chosen uniformly without replacement.
pub fn make_mask(d: usize, c: usize, beta: f64, rng: &mut RngStream) -> Result<SparseMask> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::Validation(format!("beta must lie in [0, 1), got {beta}")));
    }
    let kept = fmath::round((1.0 - beta) * d as f64) as usize;
    if kept == 0 {
        return Err(Error::DegenerateMask { beta, kept, dim: d });
    }
    let mut keep = vec![false; d * c];
    let mut positions: Vec<usize> = (0..d).collect();
    for col in 0..c {
        rng.shuffle(&mut positions);
        for &r in positions.iter().take(kept) {
            keep[r * c + col] = true;
        }
    }
    Ok(SparseMask { rows: d, cols: c, keep, beta })
}

/// Column-norm and pairwise-angle statistics of a classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct EtfDiagnostics {
    pub norm_mean: f64,
    /// Population variance of column norms.
    pub norm_var: f64,
    pub angle_mean_deg: f64,
    /// Population variance of pairwise angles, in squared degrees.
    pub angle_var_deg: f64,
    pub min_angle_deg: f64,
}

fn population_stats(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Computes [`EtfDiagnostics`] over the masked classifier: statistics of the
/// `C` column norms and of all `C(C-1)/2` pairwise angles in degrees.
pub fn diagnostics(psi: &ClassifierMatrix, mask: &SparseMask) -> Result<EtfDiagnostics> {
    let w = mask.apply(psi.weights());
    let c = w.cols();
    let norms: Vec<f64> = (0..c).map(|j| w.col_norm(j)).collect();
    if let Some(class) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::DegenerateVector { class });
    }
    let unit = Matrix::from_fn(w.rows(), c, |r, j| w.get(r, j) / norms[j]);
    let gram = unit.transpose().matmul(&unit)?;
    let mut angles = Vec::with_capacity(c * (c - 1) / 2);
    for i in 0..c {
        for j in (i + 1)..c {
            let cos = gram.get(i, j).clamp(-1.0, 1.0);
            angles.push(fmath::to_degrees(fmath::acos(cos)));
        }
    }
    let (norm_mean, norm_var) = population_stats(&norms);
    let (angle_mean_deg, angle_var_deg) = population_stats(&angles);
    let min_angle_deg = angles.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(EtfDiagnostics {
        norm_mean,
        norm_var,
        angle_mean_deg,
        angle_var_deg,
        min_angle_deg,
    })
}

/// Hyperparameters of the sparse-classifier construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SsecConfig {
    /// Target column norm.
    pub gamma: f64,
    /// Sparsity ratio: fraction of entries zeroed per column.
    pub beta: f64,
    pub sgd: SgdConfig,
    /// Cosines are clamped to `[-1 + eps, 1 - eps]` before `acos`; at the clamp
    /// boundary the angle term contributes zero gradient.
    pub cosine_clamp: f64,
    /// Weight on the angle term. The combined loss is written as a plain sum,
    /// so this defaults to 1.
    pub angle_weight: f64,
}

impl Default for SsecConfig {
    fn default() -> Self {
        SsecConfig {
            gamma: 1.0,
            beta: 0.6,
            // 1e-4 for 10k steps; momentum 0.9 is needed for the norm gap
            // |sqrt(1-beta) - gamma| to close within that budget.
            sgd: SgdConfig { learning_rate: 1e-4, steps: 10_000, momentum: 0.9 },
            cosine_clamp: 1e-7,
            angle_weight: 1.0,
        }
    }
}

impl SsecConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::Validation(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::Validation(format!("beta must lie in [0, 1), got {}", self.beta)));
        }
        if !(self.cosine_clamp > 0.0) || self.cosine_clamp >= 1.0 {
            return Err(Error::Validation(format!(
                "cosine clamp must lie in (0, 1), got {}",
                self.cosine_clamp
            )));
        }
        if self.angle_weight < 0.0 || !self.angle_weight.is_finite() {
            return Err(Error::Validation(format!(
                "angle weight must be nonnegative, got {}",
                self.angle_weight
            )));
        }
        self.sgd.validate()
    }
}
