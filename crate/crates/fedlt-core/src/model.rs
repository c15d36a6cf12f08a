//! Feed-forward feature extractor with analytic backpropagation, plus the
//! classifier-head roles and the alternating local update.
//!
//! Each client trains three things against its local data: the shared backbone
//! `theta` (through the frozen sparse classifier), an auxiliary global head that
//! is aggregated server-side, and a personal head that never leaves the client.
//! One mini-batch performs the alternation: first backprop through the frozen
//! head and step `theta` only, then freeze `theta` and step both trainable
//! heads on their own cross-entropy losses.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::datagen::LabeledSet;
use crate::error::{Error, Result};
use crate::numerics::fmath;
use crate::numerics::{sgd_step_in_place, Matrix, RngStream, SgdConfig};
use crate::ssec::{ClassifierMatrix, HeadRole};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    /// max(0, z) on hidden layers; the final layer is always linear.
    Rectifier,
    /// No nonlinearity; turns the backbone into a linear map.
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    weight: Matrix, // in x out
    bias: Vec<f64>, // out
}

impl Layer {
    pub fn weight(&self) -> &Matrix {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub(crate) fn weight_mut(&mut self) -> &mut Matrix {
        &mut self.weight
    }

    pub(crate) fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }
}

/// The feature extractor `f(x, theta)`: a chain of affine layers with the
/// activation applied between them (never after the last).
#[derive(Debug, Clone, PartialEq)]
pub struct Backbone {
    layers: Vec<Layer>,
    activation: Activation,
}

impl Backbone {
    /// He-style initialization: weights `N(0, sqrt(2 / fan_in))`, zero biases.
    pub fn new(widths: &[usize], activation: Activation, rng: &mut RngStream) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Validation(
                "backbone needs at least an input and an output width".into(),
            ));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::Validation("backbone widths must be positive".into()));
        }
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for pair in widths.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let scale = match activation {
                Activation::Rectifier => fmath::sqrt(2.0 / fan_in as f64),
                Activation::Identity => fmath::sqrt(1.0 / fan_in as f64),
            };
            layers.push(Layer {
                weight: Matrix::standard_normal(fan_in, fan_out, rng).scale(scale),
                bias: vec![0.0; fan_out],
            });
        }
        Ok(Backbone { layers, activation })
    }

    /// Assembles a backbone from explicit layer parameters, validating that
    /// consecutive shapes chain.
    pub fn from_layers(params: Vec<(Matrix, Vec<f64>)>, activation: Activation) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::Validation("backbone needs at least one layer".into()));
        }
        for (i, (w, b)) in params.iter().enumerate() {
            if w.cols() != b.len() {
                return Err(Error::dim(format!(
                    "layer {i}: weight is {}x{} but bias has {}",
                    w.rows(),
                    w.cols(),
                    b.len()
                )));
            }
            if i > 0 && params[i - 1].0.cols() != w.rows() {
                return Err(Error::dim(format!(
                    "layer {i} input {} does not chain from previous output {}",
                    w.rows(),
                    params[i - 1].0.cols()
                )));
            }
        }
        let layers = params.into_iter().map(|(weight, bias)| Layer { weight, bias }).collect();
        Ok(Backbone { layers, activation })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.rows()
    }

    /// Feature dimension `d` of the extractor output.
    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weight.cols()
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim()];
        w.extend(self.layers.iter().map(|l| l.weight.cols()));
        w
    }

    pub fn bits_eq(&self, other: &Backbone) -> bool {
        self.activation == other.activation
            && self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.weight.bits_eq(&b.weight)
                    && a.bias.iter().zip(&b.bias).all(|(x, y)| x.to_bits() == y.to_bits())
                    && a.bias.len() == b.bias.len()
            })
    }

    /// Forward pass keeping the intermediates needed for backprop.
    pub fn forward(&self, x: &Matrix) -> Result<ForwardTrace> {
        if x.cols() != self.input_dim() {
            return Err(Error::dim(format!(
                "input width {} does not match backbone input {}",
                x.cols(),
                self.input_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            inputs.push(a.clone());
            let mut z = a.matmul(&layer.weight)?;
            for r in 0..z.rows() {
                let row = z.row_mut(r);
                for (v, b) in row.iter_mut().zip(&layer.bias) {
                    *v += b;
                }
            }
            let last = l + 1 == self.layers.len();
            a = if last {
                z.clone()
            } else {
                match self.activation {
                    Activation::Rectifier => {
                        Matrix::from_fn(z.rows(), z.cols(), |r, c| z.get(r, c).max(0.0))
                    }
                    Activation::Identity => z.clone(),
                }
            };
            pre.push(z);
        }
        Ok(ForwardTrace { inputs, pre, features: a })
    }

    /// Backprop of `grad_features` (dL/dh) to every weight and bias.
    pub fn backward(&self, trace: &ForwardTrace, grad_features: &Matrix) -> Result<BackboneGrads> {
        if grad_features.shape() != trace.features.shape() {
            return Err(Error::dim("feature gradient shape mismatch"));
        }
        let n = self.layers.len();
        let mut grads = BackboneGrads {
            weights: vec![Matrix::zeros(0, 0); n],
            biases: vec![Vec::new(); n],
        };
        let mut delta = grad_features.clone();
        for l in (0..n).rev() {
            grads.weights[l] = trace.inputs[l].transpose().matmul(&delta)?;
            let mut bias = vec![0.0; self.layers[l].weight.cols()];
            for r in 0..delta.rows() {
                for (b, v) in bias.iter_mut().zip(delta.row(r)) {
                    *b += v;
                }
            }
            grads.biases[l] = bias;
            if l > 0 {
                let back = delta.matmul(&self.layers[l].weight.transpose())?;
                let z = &trace.pre[l - 1];
                delta = match self.activation {
                    Activation::Rectifier => Matrix::from_fn(back.rows(), back.cols(), |r, c| {
                        if z.get(r, c) > 0.0 {
                            back.get(r, c)
                        } else {
                            0.0
                        }
                    }),
                    Activation::Identity => back,
                };
            }
        }
        Ok(grads)
    }

    fn apply_sgd(&mut self, grads: &BackboneGrads, cfg: &SgdConfig, vel: &mut BackboneVelocity) {
        for (l, layer) in self.layers.iter_mut().enumerate() {
            sgd_step_in_place(&mut layer.weight, &grads.weights[l], cfg, &mut vel.weights[l]);
            for ((b, g), v) in layer
                .bias
                .iter_mut()
                .zip(&grads.biases[l])
                .zip(vel.biases[l].iter_mut())
            {
                *v = cfg.momentum * *v + g;
                *b -= cfg.learning_rate * *v;
            }
        }
    }
}

/// Cached intermediates of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    inputs: Vec<Matrix>,
    pre: Vec<Matrix>,
    /// Extractor output `h`, one row per sample.
    pub features: Matrix,
}

#[derive(Debug, Clone)]
pub struct BackboneGrads {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

struct BackboneVelocity {
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
}

impl BackboneVelocity {
    fn zeros_like(backbone: &Backbone) -> Self {
        BackboneVelocity {
            weights: backbone
                .layers
                .iter()
                .map(|l| Matrix::zeros(l.weight.rows(), l.weight.cols()))
                .collect(),
            biases: backbone.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }
}

/// The three classifier heads a client sees during training.
#[derive(Debug, Clone)]
pub struct HeadSet {
    /// Frozen sparse classifier; never modified after construction.
    pub ssec: ClassifierMatrix,
    /// Trainable global head, aggregated across clients.
    pub aux_global: ClassifierMatrix,
    /// Trainable personal head, retained locally.
    pub personal: ClassifierMatrix,
}

impl HeadSet {
    pub fn new(
        ssec: ClassifierMatrix,
        aux_global: ClassifierMatrix,
        personal: ClassifierMatrix,
    ) -> Result<Self> {
        let shape = ssec.weights().shape();
        if aux_global.weights().shape() != shape || personal.weights().shape() != shape {
            return Err(Error::dim("all heads must share the d x C shape"));
        }
        Ok(HeadSet { ssec, aux_global, personal })
    }
}

/// Mean softmax cross-entropy of `h^T head` against `labels`, with analytic
/// gradients for both the features and the head weights.
pub fn ce_loss_and_grads(
    h: &Matrix,
    head: &ClassifierMatrix,
    labels: &[usize],
) -> Result<(f64, Matrix, Matrix)> {
    let (batch, d) = h.shape();
    if d != head.dim() {
        return Err(Error::dim(format!(
            "features have width {d}, head expects {}",
            head.dim()
        )));
    }
    if labels.len() != batch {
        return Err(Error::dim(format!("{batch} rows vs {} labels", labels.len())));
    }
    let classes = head.classes();
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::Validation(format!("label {bad} out of range")));
    }
    let logits = h.matmul(head.weights())?;
    let mut dz = Matrix::zeros(batch, classes);
    let inv_b = 1.0 / batch as f64;
    let mut loss = 0.0;
    for i in 0..batch {
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for &z in row {
            sum += fmath::exp(z - max);
        }
        let lse = max + fmath::ln(sum);
        loss += (lse - row[labels[i]]) * inv_b;
        let out = dz.row_mut(i);
        for (c, &z) in row.iter().enumerate() {
            let p = fmath::exp(z - lse);
            out[c] = (p - if c == labels[i] { 1.0 } else { 0.0 }) * inv_b;
        }
    }
    let grad_h = dz.matmul(&head.weights().transpose())?;
    let grad_head = h.transpose().matmul(&dz)?;
    Ok((loss, grad_h, grad_head))
}

/// Argmax over `h^T head` per row; ties resolve to the lowest class index.
pub fn predict(h: &Matrix, head: &ClassifierMatrix) -> Result<Vec<usize>> {
    let logits = h.matmul(head.weights())?;
    Ok((0..logits.rows())
        .map(|i| {
            let row = logits.row(i);
            let mut best = 0;
            for (c, &z) in row.iter().enumerate().skip(1) {
                if z > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect())
}

/// Whether the step-2 head updates see features from the just-updated backbone
/// or the features computed before the step-1 update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSource {
    PostUpdate,
    PreUpdate,
}

/// Local training schedule shared by all clients.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalUpdateConfig {
    pub sgd: SgdConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub feature_source: FeatureSource,
}

impl LocalUpdateConfig {
    pub fn validate(&self) -> Result<()> {
        self.sgd.validate()?;
        if self.epochs == 0 {
            return Err(Error::Validation("local epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Validation("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Result of one client round: the parameters that travel back to the server.
#[derive(Debug, Clone)]
pub struct LocalUpdate {
    pub backbone: Backbone,
    pub aux_head: ClassifierMatrix,
    /// Mean step-1 training loss over all batches, `None` when skipped.
    pub mean_loss: Option<f64>,
}

pub(crate) fn head_sgd_step(
    head: &mut ClassifierMatrix,
    h: &Matrix,
    labels: &[usize],
    cfg: &SgdConfig,
    velocity: &mut Matrix,
) -> Result<f64> {
    let (loss, _, grad_head) = ce_loss_and_grads(h, head, labels)?;
    sgd_step_in_place(head.weights_mut(), &grad_head, cfg, velocity);
    Ok(loss)
}

/// One client round of the alternating update.
///
/// For `cfg.epochs` passes over `train` (mini-batched, reshuffled per epoch):
/// step 1 backprops through the frozen `ssec` head and steps only the backbone
/// (the head gradient is discarded); step 2 freezes the backbone, recomputes
/// features per `cfg.feature_source`, and steps the auxiliary and personal
/// heads on their own losses. The personal head mutates in place and is never
/// part of the return value; `ssec` is untouched. An empty dataset is a
/// warned no-op.
pub fn client_update(
    backbone: &Backbone,
    aux_global: &ClassifierMatrix,
    personal: &mut ClassifierMatrix,
    ssec: &ClassifierMatrix,
    train: &LabeledSet,
    cfg: &LocalUpdateConfig,
    rng: &mut RngStream,
) -> Result<LocalUpdate> {
    cfg.validate()?;
    if train.is_empty() {
        log::warn!("client update skipped: empty local dataset");
        return Ok(LocalUpdate {
            backbone: backbone.clone(),
            aux_head: aux_global.clone(),
            mean_loss: None,
        });
    }
    let mut theta = backbone.clone();
    let mut psi = aux_global.clone();
    let mut theta_vel = BackboneVelocity::zeros_like(&theta);
    let mut psi_vel = Matrix::zeros(psi.dim(), psi.classes());
    let mut phi_vel = Matrix::zeros(personal.dim(), personal.classes());
    let mut loss_sum = 0.0;
    let mut batches = 0usize;

    let mut order: Vec<usize> = (0..train.len()).collect();
    for _epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(cfg.batch_size) {
            let part = train.subset(batch)?;
            let x = part.features();
            let labels = part.labels();

            // Step 1: fix the heads, update theta through the frozen classifier.
            let trace = theta.forward(x)?;
            let (loss, grad_h, _discarded) = ce_loss_and_grads(&trace.features, ssec, labels)?;
            let grads = theta.backward(&trace, &grad_h)?;
            theta.apply_sgd(&grads, &cfg.sgd, &mut theta_vel);
            loss_sum += loss;
            batches += 1;

            // Step 2: fix theta, update the trainable heads.
            let h = match cfg.feature_source {
                FeatureSource::PostUpdate => theta.forward(x)?.features,
                FeatureSource::PreUpdate => trace.features,
            };
            head_sgd_step(&mut psi, &h, labels, &cfg.sgd, &mut psi_vel)?;
            head_sgd_step(personal, &h, labels, &cfg.sgd, &mut phi_vel)?;
        }
    }
    Ok(LocalUpdate {
        backbone: theta,
        aux_head: psi,
        mean_loss: Some(loss_sum / batches as f64),
    })
}

/// Standard FedAvg-style local update: backbone and a single trainable head
/// step jointly on the same cross-entropy loss.
pub fn client_update_joint(
    backbone: &Backbone,
    head: &ClassifierMatrix,
    train: &LabeledSet,
    cfg: &LocalUpdateConfig,
    rng: &mut RngStream,
) -> Result<LocalUpdate> {
    cfg.validate()?;
    if train.is_empty() {
        log::warn!("client update skipped: empty local dataset");
        return Ok(LocalUpdate {
            backbone: backbone.clone(),
            aux_head: head.clone(),
            mean_loss: None,
        });
    }
    let mut theta = backbone.clone();
    let mut w = head.clone();
    let mut theta_vel = BackboneVelocity::zeros_like(&theta);
    let mut head_vel = Matrix::zeros(w.dim(), w.classes());
    let mut loss_sum = 0.0;
    let mut batches = 0usize;

    let mut order: Vec<usize> = (0..train.len()).collect();
    for _epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(cfg.batch_size) {
            let part = train.subset(batch)?;
            let trace = theta.forward(part.features())?;
            let (loss, grad_h, grad_head) =
                ce_loss_and_grads(&trace.features, &w, part.labels())?;
            let grads = theta.backward(&trace, &grad_h)?;
            theta.apply_sgd(&grads, &cfg.sgd, &mut theta_vel);
            sgd_step_in_place(w.weights_mut(), &grad_head, &cfg.sgd, &mut head_vel);
            loss_sum += loss;
            batches += 1;
        }
    }
    Ok(LocalUpdate {
        backbone: theta,
        aux_head: w,
        mean_loss: Some(loss_sum / batches as f64),
    })
}

/// Fresh trainable head with small Gaussian weights.
pub fn init_trainable_head(d: usize, classes: usize, role: HeadRole, rng: &mut RngStream) -> Result<ClassifierMatrix> {
    ClassifierMatrix::new(Matrix::standard_normal(d, classes, rng).scale(0.01), role)
}
