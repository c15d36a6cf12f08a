//! Round scheduling, client sampling, broadcast, and weighted aggregation.
//!
//! The federation is simulated in-process: each round samples clients, hands
//! every one a copy of the global parameters, runs the local update, and takes
//! the sample-size-weighted mean of what comes back. Personal heads live inside
//! [`ClientState`] and are never aggregated. All floating-point reductions run
//! in ascending client order so results do not depend on executor parallelism.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::datagen::LabeledSet;
use crate::error::{Error, Result};
use crate::evalkit::{evaluate_gm, evaluate_pm, ClassSplit};
use crate::model::{
    client_update, client_update_joint, Backbone, LocalUpdate, LocalUpdateConfig,
};
use crate::numerics::fmath;
use crate::numerics::{RngStream, SgdConfig};
use crate::ssec::ClassifierMatrix;

/// Server-side model: shared backbone plus the auxiliary global head.
#[derive(Debug, Clone)]
pub struct GlobalState {
    pub backbone: Backbone,
    pub aux_head: ClassifierMatrix,
    pub round: usize,
}

/// One client: its data, its private personal head, and its id.
#[derive(Debug, Clone)]
pub struct ClientState {
    pub id: usize,
    pub train: LabeledSet,
    pub test: LabeledSet,
    pub personal: ClassifierMatrix,
}

impl ClientState {
    pub fn sample_count(&self) -> usize {
        self.train.len()
    }
}

/// Federation schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct FedConfig {
    pub clients: usize,
    pub rounds: usize,
    pub local_epochs: usize,
    /// Fraction of clients sampled per round, in (0, 1].
    pub participation: f64,
    pub sgd: SgdConfig,
    pub batch_size: usize,
    pub seed: u64,
    pub feature_source: crate::model::FeatureSource,
}

impl FedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clients == 0 || self.rounds == 0 || self.local_epochs == 0 {
            return Err(Error::Validation(
                "clients, rounds, and local epochs must all be >= 1".into(),
            ));
        }
        if !(self.participation > 0.0 && self.participation <= 1.0) {
            return Err(Error::Validation(format!(
                "participation must lie in (0, 1], got {}",
                self.participation
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Validation("batch size must be >= 1".into()));
        }
        self.sgd.validate()
    }

    fn local(&self) -> LocalUpdateConfig {
        LocalUpdateConfig {
            sgd: self.sgd.clone(),
            epochs: self.local_epochs,
            batch_size: self.batch_size,
            feature_source: self.feature_source,
        }
    }
}

/// Uniform sample of `max(1, round(fraction * k))` client ids without
/// replacement, returned in ascending order.
pub fn sample_clients(k: usize, fraction: f64, rng: &mut RngStream) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Validation(format!(
            "participation fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let m = (fmath::round(fraction * k as f64) as usize).clamp(1, k);
    let mut ids: Vec<usize> = (0..k).collect();
    rng.shuffle(&mut ids);
    ids.truncate(m);
    ids.sort_unstable();
    Ok(ids)
}

/// Sample-size-weighted mean of client updates, applied identically to the
/// backbone and the auxiliary head.
///
/// Computed in delta form around the first update — `p_0 + sum_i w_i (p_i -
/// p_0)` with a fixed ascending-id summation order — so identical inputs
/// aggregate to themselves exactly and results are bit-reproducible.
pub fn aggregate(
    updates: &[(Backbone, ClassifierMatrix, usize)],
) -> Result<(Backbone, ClassifierMatrix)> {
    let Some((anchor_bb, anchor_head, _)) = updates.first() else {
        return Err(Error::Protocol("aggregate called with no updates".to_string()));
    };
    let total: usize = updates.iter().map(|(_, _, n)| n).sum();
    if total == 0 {
        return Err(Error::Protocol("aggregate called with zero total weight".to_string()));
    }
    for (bb, head, _) in updates {
        if bb.widths() != anchor_bb.widths() {
            return Err(Error::dim("backbone shapes differ across updates"));
        }
        if head.weights().shape() != anchor_head.weights().shape() {
            return Err(Error::dim("head shapes differ across updates"));
        }
    }
    let mut backbone = anchor_bb.clone();
    let mut head = anchor_head.clone();
    for (bb, h, n) in updates {
        let w = *n as f64 / total as f64;
        if w == 0.0 {
            continue;
        }
        blend_backbone(&mut backbone, anchor_bb, bb, w)?;
        let delta = h.weights().sub(anchor_head.weights())?;
        head.weights_mut().axpy_in_place(w, &delta);
    }
    Ok((backbone, head))
}

fn blend_backbone(out: &mut Backbone, anchor: &Backbone, other: &Backbone, w: f64) -> Result<()> {
    let params = out
        .layers_mut()
        .iter_mut()
        .zip(anchor.layers().iter().zip(other.layers()));
    for (layer, (base, upd)) in params {
        let delta = upd.weight().sub(base.weight())?;
        layer.weight_mut().axpy_in_place(w, &delta);
        for ((b, &a), &u) in layer
            .bias_mut()
            .iter_mut()
            .zip(base.bias())
            .zip(upd.bias())
        {
            *b += w * (u - a);
        }
    }
    Ok(())
}

/// Per-round record of training loss and (when evaluated) accuracy metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub round: usize,
    /// Mean step-1 loss over participating clients; `None` if none trained.
    pub train_loss: Option<f64>,
    pub gm_accuracy: Option<f64>,
    pub many_accuracy: Option<f64>,
    pub med_accuracy: Option<f64>,
    pub few_accuracy: Option<f64>,
    pub pm_accuracy: Option<f64>,
}

/// What the clients train against during stage 1.
#[derive(Debug, Clone, Copy)]
pub enum TrainingMode<'a> {
    /// Alternating update against a frozen classifier (sparse or dense ETF).
    FrozenClassifier(&'a ClassifierMatrix),
    /// Joint backbone+head training, i.e. plain federated averaging.
    JointHead,
}

/// Evaluation schedule for the per-round reports.
pub struct EvalPlan<'a> {
    pub balanced_test: &'a LabeledSet,
    pub split: &'a ClassSplit,
    /// Evaluate on rounds divisible by `every` (and always the final round).
    pub every: usize,
}

/// Executes one round's worth of client updates. Implementations may run
/// clients in parallel but must return outcomes for exactly the ids requested;
/// aggregation order is fixed by the caller regardless.
pub trait RoundExecutor: Sync {
    fn run_round(
        &self,
        clients: &mut [ClientState],
        sampled: &[usize],
        task: &(dyn Fn(&mut ClientState) -> Result<LocalUpdate> + Sync),
    ) -> Vec<(usize, Result<LocalUpdate>)>;
}

/// Runs sampled clients one after another, in ascending id order.
pub struct SequentialExecutor;

impl RoundExecutor for SequentialExecutor {
    fn run_round(
        &self,
        clients: &mut [ClientState],
        sampled: &[usize],
        task: &(dyn Fn(&mut ClientState) -> Result<LocalUpdate> + Sync),
    ) -> Vec<(usize, Result<LocalUpdate>)> {
        sampled
            .iter()
            .map(|&k| (k, task(&mut clients[k])))
            .collect()
    }
}

/// Stage 1: `cfg.rounds` rounds of sample / broadcast / local update /
/// aggregate. Personal heads evolve in place on the clients and are never
/// aggregated; unsampled clients keep theirs stale. A client whose update
/// fails is dropped from that round's aggregation with a warning.
pub fn run_stage1(
    mut global: GlobalState,
    clients: &mut [ClientState],
    mode: TrainingMode,
    cfg: &FedConfig,
    eval: Option<&EvalPlan>,
    exec: &dyn RoundExecutor,
) -> Result<(GlobalState, Vec<RoundReport>)> {
    cfg.validate()?;
    if clients.len() != cfg.clients {
        return Err(Error::Protocol(format!(
            "config says {} clients, got {}",
            cfg.clients,
            clients.len()
        )));
    }
    let root = RngStream::new(cfg.seed, "stage1");
    let local_cfg = cfg.local();
    let mut reports = Vec::with_capacity(cfg.rounds);

    for t in 1..=cfg.rounds {
        let mut sample_rng = root.derive_idx("sample", t);
        let sampled = sample_clients(cfg.clients, cfg.participation, &mut sample_rng)?;

        let round_stream = root.derive_idx("round", t);
        let backbone = &global.backbone;
        let aux = &global.aux_head;
        let local_cfg = &local_cfg;
        let task = move |client: &mut ClientState| -> Result<LocalUpdate> {
            let mut rng = round_stream.derive_idx("client", client.id);
            match mode {
                TrainingMode::FrozenClassifier(frozen) => client_update(
                    backbone,
                    aux,
                    &mut client.personal,
                    frozen,
                    &client.train,
                    local_cfg,
                    &mut rng,
                ),
                TrainingMode::JointHead => {
                    client_update_joint(backbone, aux, &client.train, local_cfg, &mut rng)
                }
            }
        };
        let outcomes = exec.run_round(clients, &sampled, &task);

        let mut updates = Vec::with_capacity(outcomes.len());
        let mut losses = Vec::new();
        let mut ordered: Vec<(usize, Result<LocalUpdate>)> = outcomes;
        ordered.sort_by_key(|(k, _)| *k);
        for (k, outcome) in ordered {
            match outcome {
                Ok(update) => {
                    if let Some(loss) = update.mean_loss {
                        losses.push(loss);
                    }
                    updates.push((update.backbone, update.aux_head, clients[k].sample_count()));
                }
                Err(err) => log::warn!("client {k} failed in round {t}: {err}"),
            }
        }
        let (backbone, aux_head) = aggregate(&updates)?;
        global = GlobalState { backbone, aux_head, round: t };

        let mut report = RoundReport {
            round: t,
            train_loss: (!losses.is_empty())
                .then(|| losses.iter().sum::<f64>() / losses.len() as f64),
            gm_accuracy: None,
            many_accuracy: None,
            med_accuracy: None,
            few_accuracy: None,
            pm_accuracy: None,
        };
        if let Some(plan) = eval {
            if (plan.every > 0 && t % plan.every == 0) || t == cfg.rounds {
                let monitor_head = match mode {
                    TrainingMode::FrozenClassifier(frozen) => frozen,
                    TrainingMode::JointHead => &global.aux_head,
                };
                let gm = evaluate_gm(&global.backbone, monitor_head, plan.balanced_test, plan.split)?;
                report.gm_accuracy = Some(gm.gm_accuracy);
                report.many_accuracy = gm.many_accuracy;
                report.med_accuracy = gm.med_accuracy;
                report.few_accuracy = gm.few_accuracy;
                let pairs: Vec<(&ClassifierMatrix, &LabeledSet)> = clients
                    .iter()
                    .map(|c| {
                        let head = match mode {
                            TrainingMode::FrozenClassifier(_) => &c.personal,
                            TrainingMode::JointHead => &global.aux_head,
                        };
                        (head, &c.test)
                    })
                    .collect();
                report.pm_accuracy = Some(evaluate_pm(&global.backbone, &pairs)?);
            }
        }
        reports.push(report);
    }
    Ok((global, reports))
}
