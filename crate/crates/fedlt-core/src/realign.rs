//! Norm-based head realignment and local finetuning.
//!
//! After federated training, the auxiliary global head carries class-frequency
//! information in its column norms. Global realignment normalizes every column
//! to unit length, removing the long-tail norm bias while preserving learned
//! directions. Local realignment rebuilds each personal head from the global
//! directions scaled by the *local* head's per-class norms, so a client keeps
//! exactly as much of each class as its own data supported.

use alloc::format;
use alloc::vec::Vec;

use crate::datagen::LabeledSet;
use crate::error::{Error, Result};
use crate::model::{head_sgd_step, Backbone};
use crate::numerics::{Matrix, RngStream, SgdConfig};
use crate::ssec::{ClassifierMatrix, HeadRole};

/// Where local realignment takes its class directions from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionSource {
    /// Normalize the global column first (norm transfer is exact).
    NormalizedPsi,
    /// Use the raw global column; the output norm is `|psi_c| * |phi_c|`.
    RawPsi,
}

/// Global realignment: every column of the head divided by its own norm.
pub fn ga_fr(psi: &ClassifierMatrix) -> Result<ClassifierMatrix> {
    let w = psi.weights();
    let (d, c) = w.shape();
    let mut norms = Vec::with_capacity(c);
    for class in 0..c {
        let n = w.col_norm(class);
        if n == 0.0 {
            return Err(Error::DegenerateHead { class });
        }
        norms.push(n);
    }
    let aligned = Matrix::from_fn(d, c, |r, j| w.get(r, j) / norms[j]);
    ClassifierMatrix::new(aligned, HeadRole::Realigned)
}

/// Local realignment with the default normalized direction source.
pub fn la_fr(psi: &ClassifierMatrix, phi: &ClassifierMatrix) -> Result<ClassifierMatrix> {
    la_fr_with(psi, phi, DirectionSource::NormalizedPsi)
}

/// Local realignment: per class, the global direction scaled by the personal
/// head's column norm. A zero personal column stays zero (the client never saw
/// that class); a zero global column is an error.
pub fn la_fr_with(
    psi: &ClassifierMatrix,
    phi: &ClassifierMatrix,
    source: DirectionSource,
) -> Result<ClassifierMatrix> {
    let w = psi.weights();
    if w.shape() != phi.weights().shape() {
        return Err(Error::dim(format!(
            "global head {:?} vs personal head {:?}",
            w.shape(),
            phi.weights().shape()
        )));
    }
    let (d, c) = w.shape();
    let mut scale = Vec::with_capacity(c);
    for class in 0..c {
        let psi_norm = w.col_norm(class);
        if psi_norm == 0.0 {
            return Err(Error::DegenerateHead { class });
        }
        let phi_norm = phi.col_norm(class);
        scale.push(match source {
            DirectionSource::NormalizedPsi => phi_norm / psi_norm,
            DirectionSource::RawPsi => phi_norm,
        });
    }
    let aligned = Matrix::from_fn(d, c, |r, j| w.get(r, j) * scale[j]);
    ClassifierMatrix::new(aligned, HeadRole::Realigned)
}

/// The realigned global head plus one realigned personal head per client.
#[derive(Debug, Clone)]
pub struct RealignedHeads {
    pub global_aligned: ClassifierMatrix,
    pub personal_aligned: Vec<ClassifierMatrix>,
}

/// Runs global realignment once and local realignment for every client.
pub fn realign_all(
    psi: &ClassifierMatrix,
    personals: &[ClassifierMatrix],
    source: DirectionSource,
) -> Result<RealignedHeads> {
    let global_aligned = ga_fr(psi)?;
    let personal_aligned = personals
        .iter()
        .map(|phi| la_fr_with(psi, phi, source))
        .collect::<Result<Vec<_>>>()?;
    Ok(RealignedHeads { global_aligned, personal_aligned })
}

/// Head-only finetuning on the local set: the backbone is borrowed immutably
/// and cannot change. An empty set (or zero epochs) returns the head as-is.
pub fn local_finetune(
    backbone: &Backbone,
    head: &ClassifierMatrix,
    local: &LabeledSet,
    epochs: usize,
    cfg: &SgdConfig,
    batch_size: usize,
    rng: &mut RngStream,
) -> Result<ClassifierMatrix> {
    cfg.validate()?;
    if batch_size == 0 {
        return Err(Error::Validation("batch size must be >= 1".into()));
    }
    if local.is_empty() {
        log::warn!("local finetune skipped: empty local dataset");
        return Ok(head.clone());
    }
    let mut tuned = head.clone();
    let mut velocity = Matrix::zeros(head.dim(), head.classes());
    let mut order: Vec<usize> = (0..local.len()).collect();
    for _ in 0..epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(batch_size) {
            let part = local.subset(batch)?;
            let h = backbone.forward(part.features())?.features;
            head_sgd_step(&mut tuned, &h, part.labels(), cfg, &mut velocity)?;
        }
    }
    Ok(tuned)
}
