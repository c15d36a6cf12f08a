//! Metrics and diagnostic probes: balanced global accuracy with many/med/few
//! breakdown, personalized-model accuracy, the feature-degeneration profile,
//! and the feature-pruning sweep.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::datagen::LabeledSet;
use crate::error::{Error, Result};
use crate::model::{predict, Backbone};
use crate::numerics::fmath;
use crate::numerics::Matrix;
use crate::ssec::{ClassifierMatrix, SparseMask};

/// Class buckets by cumulative training-sample proportion.
///
/// Classes are sorted by global training count (descending, ties to the lower
/// index); a class lands in `many` when the cumulative proportion *before* it
/// is still below the first threshold, in `med` before the second, else in
/// `few`. The first class is therefore always `many`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSplit {
    pub many: Vec<usize>,
    pub med: Vec<usize>,
    pub few: Vec<usize>,
}

impl ClassSplit {
    pub fn classes(&self) -> usize {
        self.many.len() + self.med.len() + self.few.len()
    }
}

pub fn split_classes(train_counts: &[usize], t1: f64, t2: f64) -> Result<ClassSplit> {
    if !(t1 > 0.0 && t1 < t2 && t2 < 1.0) {
        return Err(Error::Validation(format!(
            "thresholds must satisfy 0 < t1 < t2 < 1, got ({t1}, {t2})"
        )));
    }
    let total: usize = train_counts.iter().sum();
    if total == 0 {
        return Err(Error::Validation("empty training profile".into()));
    }
    let mut order: Vec<usize> = (0..train_counts.len()).collect();
    order.sort_by(|&a, &b| train_counts[b].cmp(&train_counts[a]).then(a.cmp(&b)));
    let mut split = ClassSplit { many: Vec::new(), med: Vec::new(), few: Vec::new() };
    let mut seen = 0usize;
    for &class in &order {
        let before = seen as f64 / total as f64;
        if before < t1 {
            split.many.push(class);
        } else if before < t2 {
            split.med.push(class);
        } else {
            split.few.push(class);
        }
        seen += train_counts[class];
    }
    Ok(split)
}

/// Accuracy metrics of one evaluation pass.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Overall accuracy on the (balanced) test set.
    pub gm_accuracy: f64,
    pub many_accuracy: Option<f64>,
    pub med_accuracy: Option<f64>,
    pub few_accuracy: Option<f64>,
    /// Mean of per-client local accuracies; filled by [`evaluate_pm`] callers.
    pub pm_mean_accuracy: Option<f64>,
    pub per_class: Vec<f64>,
}

fn bucket_mean(per_class: &[f64], bucket: &[usize]) -> Option<f64> {
    if bucket.is_empty() {
        return None;
    }
    Some(bucket.iter().map(|&c| per_class[c]).sum::<f64>() / bucket.len() as f64)
}

/// Plain accuracy of `head` on `test` under backbone features.
pub fn accuracy(backbone: &Backbone, head: &ClassifierMatrix, test: &LabeledSet) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Validation("empty test set".into()));
    }
    let h = backbone.forward(test.features())?.features;
    let preds = predict(&h, head)?;
    let correct = preds
        .iter()
        .zip(test.labels())
        .filter(|(p, y)| p == y)
        .count();
    Ok(correct as f64 / test.len() as f64)
}

/// Global-model evaluation: overall accuracy plus per-class and bucket
/// accuracies. Every class must appear in the test set.
pub fn evaluate_gm(
    backbone: &Backbone,
    head: &ClassifierMatrix,
    test: &LabeledSet,
    split: &ClassSplit,
) -> Result<MetricsReport> {
    if test.is_empty() {
        return Err(Error::Validation("empty test set".into()));
    }
    if split.classes() != test.classes() {
        return Err(Error::Validation(format!(
            "split covers {} classes, test set has {}",
            split.classes(),
            test.classes()
        )));
    }
    if let Some(missing) = test.class_counts().iter().position(|&n| n == 0) {
        return Err(Error::Validation(format!(
            "test set has no samples of class {missing}"
        )));
    }
    let h = backbone.forward(test.features())?.features;
    let preds = predict(&h, head)?;
    let classes = test.classes();
    let mut correct = vec![0usize; classes];
    let mut total_correct = 0usize;
    for (p, &y) in preds.iter().zip(test.labels()) {
        if *p == y {
            correct[y] += 1;
            total_correct += 1;
        }
    }
    let per_class: Vec<f64> = correct
        .iter()
        .zip(test.class_counts())
        .map(|(&c, &n)| c as f64 / n as f64)
        .collect();
    Ok(MetricsReport {
        gm_accuracy: total_correct as f64 / test.len() as f64,
        many_accuracy: bucket_mean(&per_class, &split.many),
        med_accuracy: bucket_mean(&per_class, &split.med),
        few_accuracy: bucket_mean(&per_class, &split.few),
        pm_mean_accuracy: None,
        per_class,
    })
}

/// Personalized-model metric: unweighted mean of per-client local accuracies.
/// Clients with empty test sets are excluded with a warning.
pub fn evaluate_pm(
    backbone: &Backbone,
    clients: &[(&ClassifierMatrix, &LabeledSet)],
) -> Result<f64> {
    let mut sum = 0.0;
    let mut counted = 0usize;
    for (k, (head, test)) in clients.iter().enumerate() {
        if test.is_empty() {
            log::warn!("client {k} has an empty local test set; excluded from PM");
            continue;
        }
        sum += accuracy(backbone, head, test)?;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::Validation("no client has a non-empty test set".into()));
    }
    Ok(sum / counted as f64)
}

/// Per-feature statistics of one class's features, ordered by descending mean.
#[derive(Debug, Clone, PartialEq)]
pub struct DegenerationProfile {
    /// Feature indices sorted by descending class mean.
    pub order: Vec<usize>,
    /// Class mean per feature, in `order`.
    pub mean: Vec<f64>,
    /// Population variance per feature, in `order`.
    pub variance: Vec<f64>,
    /// `variance / max(|mean|, 1e-12)`; reported alongside the raw variance
    /// because "relative variance" admits both readings.
    pub rel_variance: Vec<f64>,
    /// For each ranked feature, whether the classifier masks it for this class.
    pub masked: Option<Vec<bool>>,
}

/// Feature-degeneration probe: mean and variance of every feature over the
/// class-`class` samples of `set`, sorted by descending mean, with the mask
/// column carried through the permutation.
pub fn degeneration_profile(
    backbone: &Backbone,
    set: &LabeledSet,
    class: usize,
    mask: Option<&SparseMask>,
) -> Result<DegenerationProfile> {
    if class >= set.classes() {
        return Err(Error::Validation(format!("class {class} out of range")));
    }
    let rows = set.class_indices(class);
    if rows.is_empty() {
        return Err(Error::Validation(format!("no samples of class {class}")));
    }
    if let Some(m) = mask {
        if m.rows() != backbone.output_dim() || class >= m.cols() {
            return Err(Error::dim(format!(
                "mask is {}x{}, backbone features are {}-dim",
                m.rows(),
                m.cols(),
                backbone.output_dim()
            )));
        }
    }
    let h = backbone.forward(set.subset(&rows)?.features())?.features;
    let (n, d) = h.shape();
    let mut mean = vec![0.0f64; d];
    for r in 0..n {
        for (m, v) in mean.iter_mut().zip(h.row(r)) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut variance = vec![0.0f64; d];
    for r in 0..n {
        for ((va, m), v) in variance.iter_mut().zip(&mean).zip(h.row(r)) {
            let diff = v - m;
            *va += diff * diff;
        }
    }
    for v in variance.iter_mut() {
        *v /= n as f64;
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| mean[b].partial_cmp(&mean[a]).unwrap().then(a.cmp(&b)));
    let sorted_mean: Vec<f64> = order.iter().map(|&j| mean[j]).collect();
    let sorted_var: Vec<f64> = order.iter().map(|&j| variance[j]).collect();
    let rel_variance = sorted_mean
        .iter()
        .zip(&sorted_var)
        .map(|(m, v)| v / fmath::abs(*m).max(1e-12))
        .collect();
    let masked = mask.map(|m| order.iter().map(|&j| !m.is_kept(j, class)).collect());
    Ok(DegenerationProfile {
        order,
        mean: sorted_mean,
        variance: sorted_var,
        rel_variance,
        masked,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PruneOrder {
    /// Start from the smallest class-mean magnitudes (negligible features).
    AscendingMean,
    /// Start from the largest (dominant features).
    DescendingMean,
}

/// `|class mean|` of every feature, one row per class.
fn class_mean_magnitudes(backbone: &Backbone, test: &LabeledSet) -> Result<Matrix> {
    let d = backbone.output_dim();
    let classes = test.classes();
    let mut scores = Matrix::zeros(classes, d);
    for class in 0..classes {
        let rows = test.class_indices(class);
        if rows.is_empty() {
            return Err(Error::Validation(format!("no samples of class {class}")));
        }
        let h = backbone.forward(test.subset(&rows)?.features())?.features;
        for j in 0..d {
            let mean: f64 = h.col_iter(j).sum::<f64>() / h.rows() as f64;
            scores.set(class, j, fmath::abs(mean));
        }
    }
    Ok(scores)
}

/// Prunes each class's column in that class's own feature-mean order and
/// records accuracy at each ratio: at ratio `r`, the `round(r * d)` entries of
/// column `c` whose features have the smallest (ascending) or largest
/// (descending) `|mean|` over class-`c` samples are zeroed. The input head is
/// untouched; `ratios` must be increasing and within `[0, 1]`.
pub fn pruning_sweep(
    backbone: &Backbone,
    head: &ClassifierMatrix,
    test: &LabeledSet,
    order: PruneOrder,
    ratios: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::Validation("pruning ratios must lie in [0, 1]".into()));
    }
    if ratios.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Validation("pruning ratios must be increasing".into()));
    }
    let scores = class_mean_magnitudes(backbone, test)?;
    let d = backbone.output_dim();
    let classes = head.classes();
    let per_class_rank: Vec<Vec<usize>> = (0..classes)
        .map(|class| {
            let row = scores.row(class);
            let mut ranked: Vec<usize> = (0..d).collect();
            match order {
                PruneOrder::AscendingMean => {
                    ranked.sort_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap().then(a.cmp(&b)))
                }
                PruneOrder::DescendingMean => {
                    ranked.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap().then(a.cmp(&b)))
                }
            }
            ranked
        })
        .collect();
    let mut curve = Vec::with_capacity(ratios.len());
    for &r in ratios {
        let k = fmath::round(r * d as f64) as usize;
        let mut w = head.weights().clone();
        for (class, ranked) in per_class_rank.iter().enumerate() {
            for &feature in ranked.iter().take(k) {
                w.set(feature, class, 0.0);
            }
        }
        let pruned = ClassifierMatrix::new(w, head.role())?;
        curve.push((r, accuracy(backbone, &pruned, test)?));
    }
    Ok(curve)
}

/// Spearman rank correlation with average ranks for ties. `None` when fewer
/// than two points or either side has zero rank variance.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = rx.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mean) * (b - mean);
        var_x += (a - mean) * (a - mean);
        var_y += (b - mean) * (b - mean);
    }
    if var_x == 0.0 || var_y == 0.0 {
        return None;
    }
    Some(cov / fmath::sqrt(var_x * var_y))
}

fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Activation;
    use crate::numerics::RngStream;
    use crate::ssec::HeadRole;

    fn balanced_set(classes: usize, per_class: usize, dim: usize, seed: u64) -> LabeledSet {
        let spec = crate::datagen::DatasetSpec {
            classes,
            feature_dim: dim,
            samples_per_head_class: per_class.max(classes),
            imbalance_factor: 1.0,
            class_separation: 3.0,
            noise_scale: 0.5,
        };
        crate::datagen::make_gaussian_mixture(
            &spec,
            &vec![per_class; classes],
            &mut RngStream::new(seed, "bal"),
        )
        .unwrap()
    }

    fn identity_backbone(dim: usize) -> Backbone {
        Backbone::from_layers(
            alloc::vec![(Matrix::identity(dim), alloc::vec![0.0; dim])],
            Activation::Rectifier,
        )
        .unwrap()
    }

    #[test]
    fn split_classes_follows_the_cumulative_rule() {
        // Long-tail counts for C=10, n_max=500, IF=100; cumulative-before
        // fractions cross 0.75 at class 3 and 0.95 at class 6.
        let counts = [500usize, 299, 179, 107, 64, 38, 23, 14, 8, 5];
        let split = split_classes(&counts, 0.75, 0.95).unwrap();
        assert_eq!(split.many, vec![0, 1, 2]);
        assert_eq!(split.med, vec![3, 4, 5]);
        assert_eq!(split.few, vec![6, 7, 8, 9]);
    }

    #[test]
    fn split_classes_handles_empty_buckets_and_bad_thresholds() {
        let split = split_classes(&[50, 50], 0.75, 0.95).unwrap();
        assert_eq!(split.many, vec![0, 1]);
        assert!(split.med.is_empty() && split.few.is_empty());
        assert!(split_classes(&[1, 1], 0.95, 0.75).is_err());
        assert!(split_classes(&[0, 0], 0.75, 0.95).is_err());
    }

    #[test]
    fn bucket_partition_is_exact_and_disjoint() {
        let counts = [9usize, 9, 7, 3, 2, 1, 1];
        let split = split_classes(&counts, 0.5, 0.9).unwrap();
        let mut all: Vec<usize> = split
            .many
            .iter()
            .chain(&split.med)
            .chain(&split.few)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..counts.len()).collect::<Vec<_>>());
    }

    /// A head built from the class centers themselves classifies perfectly at
    /// high separation; a head with one huge column predicts constantly.
    #[test]
    fn gm_accuracy_on_perfect_and_constant_predictors() {
        let classes = 10;
        let dim = 20;
        let test = balanced_set(classes, 20, dim, 5);
        let split = split_classes(&alloc::vec![10; classes], 0.75, 0.95).unwrap();
        let backbone = identity_backbone(dim);

        // Center-matched linear head: logits = h . mu_c (nearest-center rule up
        // to equal-norm centers), perfect at separation 3 and noise 0.5.
        let spec = crate::datagen::DatasetSpec {
            classes,
            feature_dim: dim,
            samples_per_head_class: 20,
            imbalance_factor: 1.0,
            class_separation: 3.0,
            noise_scale: 0.5,
        };
        let centers =
            crate::datagen::class_centers(&spec, &mut RngStream::new(5, "bal")).unwrap();
        // The backbone rectifies nothing on a single layer, so h = x.
        let head = ClassifierMatrix::new(centers.transpose(), HeadRole::AuxGlobal).unwrap();
        let report = evaluate_gm(&backbone, &head, &test, &split).unwrap();
        assert!(report.gm_accuracy > 0.95, "got {}", report.gm_accuracy);

        // Constant predictor: all-zero logits tie-break to class 0 everywhere.
        let w = Matrix::zeros(dim, classes);
        let constant = ClassifierMatrix::new(w, HeadRole::AuxGlobal).unwrap();
        let report = evaluate_gm(&backbone, &constant, &test, &split).unwrap();
        assert!((report.gm_accuracy - 0.1).abs() < 1e-12);
        assert_eq!(report.per_class[0], 1.0);
    }

    #[test]
    fn balanced_identity_gm_equals_mean_per_class() {
        let test = balanced_set(4, 15, 8, 9);
        let split = split_classes(&[15, 15, 15, 15], 0.75, 0.95).unwrap();
        let mut rng = RngStream::new(3, "head");
        let backbone = identity_backbone(8);
        let head = crate::model::init_trainable_head(8, 4, HeadRole::AuxGlobal, &mut rng).unwrap();
        let report = evaluate_gm(&backbone, &head, &test, &split).unwrap();
        let mean = report.per_class.iter().sum::<f64>() / 4.0;
        assert!((report.gm_accuracy - mean).abs() <= 1e-12);
    }

    #[test]
    fn pm_is_the_unweighted_client_mean() {
        let dim = 8;
        let backbone = identity_backbone(dim);
        let t1 = balanced_set(4, 10, dim, 1);
        let t2 = balanced_set(4, 10, dim, 2);
        let good = ClassifierMatrix::new(
            crate::datagen::class_centers(
                &crate::datagen::DatasetSpec {
                    classes: 4,
                    feature_dim: dim,
                    samples_per_head_class: 10,
                    imbalance_factor: 1.0,
                    class_separation: 3.0,
                    noise_scale: 0.5,
                },
                &mut RngStream::new(1, "bal"),
            )
            .unwrap()
            .transpose(),
            HeadRole::Personal,
        )
        .unwrap();
        let a1 = accuracy(&backbone, &good, &t1).unwrap();
        let a2 = accuracy(&backbone, &good, &t2).unwrap();
        let pm = evaluate_pm(&backbone, &[(&good, &t1), (&good, &t2)]).unwrap();
        assert!((pm - (a1 + a2) / 2.0).abs() < 1e-12);

        // Empty client excluded; single client is its own mean.
        let empty = LabeledSet::empty(dim, 4);
        let pm = evaluate_pm(&backbone, &[(&good, &t1), (&good, &empty)]).unwrap();
        assert!((pm - a1).abs() < 1e-12);
        assert!(evaluate_pm(&backbone, &[(&good, &empty)]).is_err());
    }

    #[test]
    fn degeneration_profile_sorts_and_carries_the_mask() {
        let dim = 6;
        let backbone = identity_backbone(dim);
        // Zero-noise set: every class-0 sample equals its center, variance 0.
        let spec = crate::datagen::DatasetSpec {
            classes: 2,
            feature_dim: dim,
            samples_per_head_class: 5,
            imbalance_factor: 1.0,
            class_separation: 2.0,
            noise_scale: 0.0,
        };
        let set =
            crate::datagen::make_gaussian_mixture(&spec, &[5, 5], &mut RngStream::new(7, "dp"))
                .unwrap();
        let mask = crate::ssec::make_mask(dim, 2, 0.5, &mut RngStream::new(7, "mask")).unwrap();
        let profile = degeneration_profile(&backbone, &set, 0, Some(&mask)).unwrap();
        assert!(profile.mean.windows(2).all(|w| w[0] >= w[1]));
        assert!(profile.variance.iter().all(|&v| v < 1e-18));
        let masked = profile.masked.unwrap();
        for (rank, &feature) in profile.order.iter().enumerate() {
            assert_eq!(masked[rank], !mask.is_kept(feature, 0));
        }
        assert!(matches!(
            degeneration_profile(&backbone, &set, 5, None),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn pruning_sweep_endpoints_are_exact() {
        let dim = 12;
        let classes = 4;
        let test = balanced_set(classes, 12, dim, 13);
        let backbone = identity_backbone(dim);
        let mut rng = RngStream::new(13, "pr");
        let head = crate::model::init_trainable_head(dim, classes, HeadRole::AuxGlobal, &mut rng)
            .unwrap();
        let baseline = accuracy(&backbone, &head, &test).unwrap();
        for order in [PruneOrder::AscendingMean, PruneOrder::DescendingMean] {
            let curve = pruning_sweep(&backbone, &head, &test, order, &[0.0, 0.5, 1.0]).unwrap();
            assert_eq!(curve[0], (0.0, baseline));
            assert!((curve[2].1 - 1.0 / classes as f64).abs() < 1e-12, "{order:?}");
        }
        assert!(pruning_sweep(&backbone, &head, &test, PruneOrder::AscendingMean, &[0.5, 0.1])
            .is_err());
    }

    #[test]
    fn spearman_handles_monotone_and_ties() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&xs, &[10.0, 20.0, 30.0, 40.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&xs, &[4.0, 3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(spearman(&xs, &[5.0, 5.0, 5.0, 5.0]), None);
        let rho = spearman(&[1.0, 1.0, 2.0, 3.0], &[2.0, 1.0, 3.0, 4.0]).unwrap();
        assert!(rho > 0.7 && rho <= 1.0);
    }
}
