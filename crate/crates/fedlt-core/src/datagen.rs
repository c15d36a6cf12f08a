//! Synthetic long-tailed data and non-IID client partitioning.
//!
//! The global training set is a Gaussian mixture whose class centers sit on the
//! vertices of a random simplex, with per-class counts following an exponential
//! long-tail profile controlled by the imbalance factor. Clients receive their
//! shares through per-class Dirichlet draws, rounded with largest-remainder
//! correction so class totals are conserved exactly. Local test sets mirror
//! each client's training distribution on a fixed budget.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::Gamma;

use crate::error::{Error, Result};
use crate::numerics::fmath;
use crate::numerics::{Matrix, RngStream};
use crate::ssec::make_dense_etf;

/// Shape of the synthetic benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub classes: usize,
    pub feature_dim: usize,
    /// Sample count of the largest (head) class.
    pub samples_per_head_class: usize,
    /// Ratio between the largest and smallest class counts; 1 means balanced.
    pub imbalance_factor: f64,
    /// Distance scale of the class centers from the origin.
    pub class_separation: f64,
    /// Isotropic noise scale around each class center.
    pub noise_scale: f64,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::Validation("need at least 2 classes".into()));
        }
        if self.feature_dim < self.classes {
            return Err(Error::Validation(format!(
                "feature_dim {} must be >= classes {} to place simplex centers",
                self.feature_dim, self.classes
            )));
        }
        if self.samples_per_head_class < self.classes {
            return Err(Error::Validation(format!(
                "samples_per_head_class {} must be >= classes {}",
                self.samples_per_head_class, self.classes
            )));
        }
        if !(self.imbalance_factor >= 1.0) || !self.imbalance_factor.is_finite() {
            return Err(Error::Validation(format!(
                "imbalance factor must be >= 1, got {}",
                self.imbalance_factor
            )));
        }
        for (name, v) in [
            ("class_separation", self.class_separation),
            ("noise_scale", self.noise_scale),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Validation(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// A feature matrix with integer labels and a per-class tally.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    features: Matrix,
    labels: Vec<usize>,
    class_counts: Vec<usize>,
}

impl LabeledSet {
    pub fn new(features: Matrix, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::dim(format!(
                "{} feature rows vs {} labels",
                features.rows(),
                labels.len()
            )));
        }
        let mut class_counts = vec![0usize; classes];
        for (i, &y) in labels.iter().enumerate() {
            if y >= classes {
                return Err(Error::Validation(format!(
                    "label {y} at row {i} out of range for {classes} classes"
                )));
            }
            class_counts[y] += 1;
        }
        Ok(LabeledSet { features, labels, class_counts })
    }

    pub fn empty(feature_dim: usize, classes: usize) -> Self {
        LabeledSet {
            features: Matrix::zeros(0, feature_dim),
            labels: Vec::new(),
            class_counts: vec![0; classes],
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn classes(&self) -> usize {
        self.class_counts.len()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    /// Row indices of every sample of `class`, in storage order.
    pub fn class_indices(&self, class: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &y)| (y == class).then_some(i))
            .collect()
    }

    /// Gathers the given rows into a new set (duplicates allowed).
    pub fn subset(&self, indices: &[usize]) -> Result<LabeledSet> {
        let dim = self.feature_dim();
        let mut features = Matrix::zeros(indices.len(), dim);
        let mut labels = Vec::with_capacity(indices.len());
        for (row, &i) in indices.iter().enumerate() {
            if i >= self.len() {
                return Err(Error::Validation(format!("subset index {i} out of range")));
            }
            features.row_mut(row).copy_from_slice(self.features.row(i));
            labels.push(self.labels[i]);
        }
        LabeledSet::new(features, labels, self.classes())
    }
}

/// Exponential long-tail profile: `n_c = round(n_max * IF^(-c / (C-1)))`, so
/// class 0 keeps `n_max` samples and the last class `n_max / IF`.
pub fn longtail_counts(spec: &DatasetSpec) -> Result<Vec<usize>> {
    spec.validate()?;
    let c = spec.classes;
    let n_max = spec.samples_per_head_class as f64;
    let mut counts = Vec::with_capacity(c);
    for k in 0..c {
        let exponent = -(k as f64) / (c as f64 - 1.0);
        let n = fmath::round(n_max * fmath::powf(spec.imbalance_factor, exponent)) as usize;
        if n == 0 {
            return Err(Error::DegenerateProfile { class: k });
        }
        counts.push(n);
    }
    Ok(counts)
}

/// Class centers: vertices of a random simplex scaled by `class_separation`,
/// returned as a `C x feature_dim` matrix (one center per row).
pub fn class_centers(spec: &DatasetSpec, rng: &mut RngStream) -> Result<Matrix> {
    spec.validate()?;
    let etf = make_dense_etf(spec.feature_dim, spec.classes, rng)?;
    Ok(etf.weights().transpose().scale(spec.class_separation))
}

/// Draws `counts[c]` samples of each class as `center_c + noise_scale * N(0, I)`.
/// Samples are stored class-major (all of class 0, then class 1, ...).
pub fn sample_mixture(
    spec: &DatasetSpec,
    centers: &Matrix,
    counts: &[usize],
    rng: &mut RngStream,
) -> Result<LabeledSet> {
    spec.validate()?;
    if centers.shape() != (spec.classes, spec.feature_dim) {
        return Err(Error::dim(format!(
            "centers {:?}, expected {}x{}",
            centers.shape(),
            spec.classes,
            spec.feature_dim
        )));
    }
    if counts.len() != spec.classes {
        return Err(Error::dim(format!(
            "{} counts for {} classes",
            counts.len(),
            spec.classes
        )));
    }
    let total: usize = counts.iter().sum();
    let mut features = Matrix::zeros(total, spec.feature_dim);
    let mut labels = Vec::with_capacity(total);
    let mut row = 0;
    for (class, &n) in counts.iter().enumerate() {
        for _ in 0..n {
            let out = features.row_mut(row);
            for (j, v) in out.iter_mut().enumerate() {
                let noise: f64 = rng.sample(rand_distr::StandardNormal);
                *v = centers.get(class, j) + spec.noise_scale * noise;
            }
            labels.push(class);
            row += 1;
        }
    }
    LabeledSet::new(features, labels, spec.classes)
}

/// Centers and samples drawn from one stream; convenient for self-contained
/// sets. When train and test must share centers, call [`class_centers`] once
/// and [`sample_mixture`] with separate streams instead.
pub fn make_gaussian_mixture(
    spec: &DatasetSpec,
    counts: &[usize],
    rng: &mut RngStream,
) -> Result<LabeledSet> {
    let centers = class_centers(spec, rng)?;
    sample_mixture(spec, &centers, counts, rng)
}

/// Per-client, per-class sample counts plus the Dirichlet concentration that
/// produced them. Column sums equal the global class counts exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionPlan {
    counts: Vec<Vec<usize>>,
    alpha: f64,
}

impl PartitionPlan {
    pub fn clients(&self) -> usize {
        self.counts.len()
    }

    pub fn classes(&self) -> usize {
        self.counts[0].len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn client_counts(&self, k: usize) -> &[usize] {
        &self.counts[k]
    }

    pub fn client_total(&self, k: usize) -> usize {
        self.counts[k].iter().sum()
    }

    pub fn class_total(&self, class: usize) -> usize {
        self.counts.iter().map(|row| row[class]).sum()
    }

    /// Mean over non-empty clients of the total-variation distance between the
    /// client's class distribution and the global one.
    pub fn mean_tv_distance(&self) -> f64 {
        let classes = self.classes();
        let global: Vec<usize> = (0..classes).map(|c| self.class_total(c)).collect();
        let global_total: usize = global.iter().sum();
        let mut sum = 0.0;
        let mut clients = 0;
        for row in &self.counts {
            let total: usize = row.iter().sum();
            if total == 0 {
                continue;
            }
            let tv: f64 = row
                .iter()
                .zip(&global)
                .map(|(&a, &b)| {
                    fmath::abs(a as f64 / total as f64 - b as f64 / global_total as f64)
                })
                .sum::<f64>()
                / 2.0;
            sum += tv;
            clients += 1;
        }
        sum / clients as f64
    }
}

/// Splits `total` into integer shares proportional to `weights` using
/// largest-remainder rounding; shares sum to `total` exactly. Ties go to the
/// lower index.
fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let wsum: f64 = weights.iter().sum();
    let mut shares = vec![0usize; weights.len()];
    if wsum <= 0.0 || total == 0 {
        return shares;
    }
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(weights.len());
    let mut assigned = 0usize;
    for (i, &w) in weights.iter().enumerate() {
        let target = w / wsum * total as f64;
        let base = fmath::floor(target) as usize;
        shares[i] = base;
        assigned += base;
        remainders.push((i, target - base as f64));
    }
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for &(i, _) in remainders.iter().take(total - assigned) {
        shares[i] += 1;
    }
    shares
}

/// Splits each class across `k` clients by an independent `Dirichlet(alpha 1_K)`
/// draw, rounded so column sums match the class counts exactly. Plans that
/// leave a client with zero samples overall are redrawn up to 10 times; after
/// that the empty clients are kept and a warning is logged.
pub fn dirichlet_partition(
    set: &LabeledSet,
    k: usize,
    alpha: f64,
    rng: &mut RngStream,
) -> Result<PartitionPlan> {
    if k == 0 {
        return Err(Error::Validation("need at least one client".into()));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Validation(format!("alpha must be positive, got {alpha}")));
    }
    let gamma = Gamma::new(alpha, 1.0)
        .map_err(|e| Error::Validation(format!("invalid Dirichlet concentration: {e}")))?;
    let classes = set.classes();
    let mut plan = Vec::new();
    for attempt in 0..10 {
        let mut counts = vec![vec![0usize; classes]; k];
        for class in 0..classes {
            let n = set.class_counts()[class];
            let mut p = vec![0.0f64; k];
            // Dirichlet via normalized Gammas; redraw the rare all-zero vector.
            loop {
                for v in p.iter_mut() {
                    *v = rng.sample(gamma);
                }
                if p.iter().sum::<f64>() > 0.0 {
                    break;
                }
            }
            let shares = largest_remainder(&p, n);
            for (client, &s) in shares.iter().enumerate() {
                counts[client][class] = s;
            }
        }
        let empty = counts.iter().filter(|row| row.iter().sum::<usize>() == 0).count();
        plan = counts;
        if empty == 0 {
            break;
        }
        if attempt == 9 {
            for (client, row) in plan.iter().enumerate() {
                if row.iter().sum::<usize>() == 0 {
                    log::warn!("client {client} has no samples after 10 partition draws");
                }
            }
        }
    }
    Ok(PartitionPlan { counts: plan, alpha })
}

/// Materializes per-client training sets from a plan. Within each class,
/// samples are handed out in storage order: client 0 takes the first block,
/// client 1 the next, and so on, so no sample is assigned twice.
pub fn split_by_plan(set: &LabeledSet, plan: &PartitionPlan) -> Result<Vec<LabeledSet>> {
    if plan.classes() != set.classes() {
        return Err(Error::dim(format!(
            "plan covers {} classes, set has {}",
            plan.classes(),
            set.classes()
        )));
    }
    for class in 0..set.classes() {
        if plan.class_total(class) != set.class_counts()[class] {
            return Err(Error::Protocol(format!(
                "plan assigns {} samples of class {class}, set has {}",
                plan.class_total(class),
                set.class_counts()[class]
            )));
        }
    }
    let per_class: Vec<Vec<usize>> = (0..set.classes()).map(|c| set.class_indices(c)).collect();
    let mut cursor = vec![0usize; set.classes()];
    let mut out = Vec::with_capacity(plan.clients());
    for k in 0..plan.clients() {
        let mut indices = Vec::with_capacity(plan.client_total(k));
        for (class, &take) in plan.client_counts(k).iter().enumerate() {
            let start = cursor[class];
            indices.extend_from_slice(&per_class[class][start..start + take]);
            cursor[class] += take;
        }
        out.push(set.subset(&indices)?);
    }
    Ok(out)
}

/// Samples a local test set whose class proportions match client `k`'s training
/// share of `plan`, using largest-remainder rounding on `budget` samples drawn
/// without replacement from the (class-balanced) global test pool.
pub fn make_local_test(
    global_test: &LabeledSet,
    plan: &PartitionPlan,
    k: usize,
    budget: usize,
    rng: &mut RngStream,
) -> Result<LabeledSet> {
    if k >= plan.clients() {
        return Err(Error::Validation(format!("client {k} out of range")));
    }
    if plan.classes() != global_test.classes() {
        return Err(Error::dim("plan and test set class counts differ".to_string()));
    }
    let train = plan.client_counts(k);
    let total: usize = train.iter().sum();
    if total == 0 {
        log::warn!("client {k} has no training samples; local test set is empty");
        return Ok(LabeledSet::empty(global_test.feature_dim(), global_test.classes()));
    }
    let weights: Vec<f64> = train.iter().map(|&n| n as f64).collect();
    let wanted = largest_remainder(&weights, budget);
    let mut indices = Vec::with_capacity(budget);
    for (class, &need) in wanted.iter().enumerate() {
        if need == 0 {
            continue;
        }
        let mut pool = global_test.class_indices(class);
        if need > pool.len() {
            return Err(Error::Capacity(format!(
                "class {class}: need {need} test samples, pool has {}",
                pool.len()
            )));
        }
        rng.shuffle(&mut pool);
        indices.extend_from_slice(&pool[..need]);
    }
    global_test.subset(&indices)
}

/// Parses the `label,f0,f1,...` dataset format. The class count is inferred as
/// `max label + 1`; labels must be nonnegative integers and every row must
/// carry the header's feature count.
pub fn parse_csv(text: &str) -> Result<LabeledSet> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Validation("empty file".into()))?;
    let mut fields = header.split(',');
    if fields.next().map(str::trim) != Some("label") {
        return Err(Error::Parse {
            line: 1,
            detail: "header must start with 'label'".into(),
        });
    }
    let dim = fields.count();
    if dim == 0 {
        return Err(Error::Parse { line: 1, detail: "header names no features".into() });
    }
    let mut labels = Vec::new();
    let mut data = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 1 {
            return Err(Error::Parse {
                line: line_no,
                detail: format!("expected {} fields, found {}", dim + 1, fields.len()),
            });
        }
        let label: i64 = fields[0].trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            detail: format!("label '{}' is not an integer", fields[0]),
        })?;
        if label < 0 {
            return Err(Error::Validation(format!(
                "label {label} at line {line_no} out of range"
            )));
        }
        labels.push(label as usize);
        for f in &fields[1..] {
            let v: f64 = f.trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                detail: format!("feature '{f}' is not numeric"),
            })?;
            data.push(v);
        }
    }
    if labels.is_empty() {
        return Err(Error::Validation("no data rows".into()));
    }
    let classes = labels.iter().max().unwrap() + 1;
    let features = Matrix::from_vec(labels.len(), dim, data)?;
    LabeledSet::new(features, labels, classes)
}

/// Formats a set in the `label,f0,f1,...` layout accepted by [`parse_csv`].
pub fn format_csv(set: &LabeledSet) -> String {
    let mut out = String::from("label");
    for j in 0..set.feature_dim() {
        out.push_str(&format!(",f{j}"));
    }
    out.push('\n');
    for i in 0..set.len() {
        out.push_str(&format!("{}", set.labels()[i]));
        for &v in set.features().row(i) {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(classes: usize, n_max: usize, imbalance: f64) -> DatasetSpec {
        DatasetSpec {
            classes,
            feature_dim: 2 * classes,
            samples_per_head_class: n_max,
            imbalance_factor: imbalance,
            class_separation: 2.0,
            noise_scale: 1.0,
        }
    }

    #[test]
    fn longtail_counts_match_the_formula() {
        let counts = longtail_counts(&spec(10, 5000, 100.0)).unwrap();
        assert_eq!(counts[0], 5000);
        assert_eq!(counts[9], 50);
        for (c, &n) in counts.iter().enumerate() {
            let expected = (5000.0 * 100.0f64.powf(-(c as f64) / 9.0)).round() as usize;
            assert_eq!(n, expected, "class {c}");
        }
        assert!(counts.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn longtail_balanced_and_two_class_cases() {
        assert!(longtail_counts(&spec(10, 300, 1.0)).unwrap().iter().all(|&n| n == 300));
        assert_eq!(longtail_counts(&spec(2, 100, 100.0)).unwrap(), vec![100, 1]);
    }

    #[test]
    fn longtail_zero_class_is_degenerate() {
        let err = longtail_counts(&spec(10, 100, 5000.0));
        assert!(matches!(err, Err(Error::DegenerateProfile { .. })));
    }

    #[test]
    fn mixture_counts_are_exact_and_zero_noise_hits_centers() {
        let mut sp = spec(2, 10, 1.0);
        sp.noise_scale = 0.0;
        let mut rng = RngStream::new(4, "mix");
        let centers = class_centers(&sp, &mut rng).unwrap();
        let set = sample_mixture(&sp, &centers, &[3, 3], &mut rng).unwrap();
        assert_eq!(set.class_counts(), &[3, 3]);
        for i in 0..set.len() {
            let y = set.labels()[i];
            for (j, &v) in set.features().row(i).iter().enumerate() {
                assert!((v - centers.get(y, j)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mixture_is_deterministic() {
        let sp = spec(3, 30, 2.0);
        let a = make_gaussian_mixture(&sp, &[5, 4, 3], &mut RngStream::new(9, "m")).unwrap();
        let b = make_gaussian_mixture(&sp, &[5, 4, 3], &mut RngStream::new(9, "m")).unwrap();
        assert_eq!(a, b);
    }

    fn toy_set(class_counts: &[usize]) -> LabeledSet {
        let total: usize = class_counts.iter().sum();
        let mut labels = Vec::with_capacity(total);
        for (c, &n) in class_counts.iter().enumerate() {
            labels.extend(core::iter::repeat(c).take(n));
        }
        LabeledSet::new(Matrix::zeros(total, 1), labels, class_counts.len()).unwrap()
    }

    #[test]
    fn single_client_takes_everything() {
        let set = toy_set(&[7, 3]);
        let plan = dirichlet_partition(&set, 1, 0.5, &mut RngStream::new(1, "p")).unwrap();
        assert_eq!(plan.client_counts(0), &[7, 3]);
    }

    #[test]
    fn huge_alpha_concentrates_at_uniform() {
        for seed in 0..5u64 {
            let set = toy_set(&[400]);
            let plan = dirichlet_partition(&set, 4, 1e6, &mut RngStream::new(seed, "u")).unwrap();
            for k in 0..4 {
                let n = plan.client_counts(k)[0] as i64;
                assert!((n - 100).abs() <= 2, "seed {seed} client {k}: {n}");
            }
        }
    }

    #[test]
    fn column_sums_are_conserved_exactly() {
        for seed in 0..20u64 {
            let counts = [137usize, 55, 13, 1];
            let set = toy_set(&counts);
            let k = 1 + (seed as usize % 7);
            let alpha = [0.1, 1.0, 10.0][seed as usize % 3];
            let plan =
                dirichlet_partition(&set, k, alpha, &mut RngStream::new(seed, "c")).unwrap();
            for (class, &n) in counts.iter().enumerate() {
                assert_eq!(plan.class_total(class), n, "seed {seed} class {class}");
            }
        }
    }

    #[test]
    fn heterogeneity_decreases_with_alpha() {
        for seed in 0..5u64 {
            let set = toy_set(&longtail_counts(&spec(10, 500, 100.0)).unwrap());
            let tv = |alpha: f64| {
                dirichlet_partition(&set, 8, alpha, &mut RngStream::new(seed, "tv"))
                    .unwrap()
                    .mean_tv_distance()
            };
            let (low, high) = (tv(0.1), tv(10.0));
            assert!(low > high, "seed {seed}: tv(0.1)={low} <= tv(10)={high}");
        }
    }

    #[test]
    fn split_by_plan_assigns_each_sample_once() {
        let set = toy_set(&[20, 10, 5]);
        let plan = dirichlet_partition(&set, 3, 0.5, &mut RngStream::new(3, "s")).unwrap();
        let parts = split_by_plan(&set, &plan).unwrap();
        let total: usize = parts.iter().map(|p| p.len()).sum();
        assert_eq!(total, set.len());
        for (k, part) in parts.iter().enumerate() {
            assert_eq!(part.class_counts(), plan.client_counts(k));
        }
    }

    #[test]
    fn local_test_matches_training_proportions() {
        let global = toy_set(&[100, 100, 100, 100]);
        let plan = PartitionPlan {
            counts: vec![vec![50, 50, 0, 0], vec![10, 0, 0, 30]],
            alpha: 0.5,
        };
        let mut rng = RngStream::new(2, "lt");
        let t0 = make_local_test(&global, &plan, 0, 100, &mut rng).unwrap();
        assert_eq!(t0.class_counts(), &[50, 50, 0, 0]);

        let budget = 100usize;
        let t1 = make_local_test(&global, &plan, 1, budget, &mut rng).unwrap();
        assert_eq!(t1.len(), budget);
        for class in 0..4 {
            let train_frac = plan.client_counts(1)[class] as f64 / 40.0;
            let test_frac = t1.class_counts()[class] as f64 / budget as f64;
            assert!(
                (train_frac - test_frac).abs() <= 1.0 / budget as f64,
                "class {class}: {train_frac} vs {test_frac}"
            );
        }
    }

    #[test]
    fn local_test_single_class_client_and_capacity() {
        let global = toy_set(&[50, 50]);
        let plan = PartitionPlan { counts: vec![vec![0, 33]], alpha: 1.0 };
        let mut rng = RngStream::new(8, "cap");
        let t = make_local_test(&global, &plan, 0, 40, &mut rng).unwrap();
        assert_eq!(t.class_counts(), &[0, 40]);
        assert!(matches!(
            make_local_test(&global, &plan, 0, 60, &mut rng),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn csv_round_trip_and_parse_errors() {
        let text = "label,f0,f1\n0,1.5,-2.0\n1,0.25,3.5\n";
        let set = parse_csv(text).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.class_counts(), &[1, 1]);
        assert_eq!(set.features().get(1, 1), 3.5);
        assert_eq!(parse_csv(&format_csv(&set)).unwrap(), set);

        match parse_csv("label,f0\n0,1.0\n1,oops\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(parse_csv(""), Err(Error::Validation(_))));
        assert!(matches!(parse_csv("label,f0\n"), Err(Error::Validation(_))));
        assert!(matches!(parse_csv("label,f0\n-1,2.0\n"), Err(Error::Validation(_))));
    }

    proptest::proptest! {
        #[test]
        fn longtail_ratio_tracks_the_imbalance_factor(
            n_max in 200usize..5000,
            imbalance in 1.0f64..30.0,
            classes in 2usize..12,
        ) {
            let sp = spec(classes, n_max, imbalance);
            proptest::prop_assume!(n_max as f64 / imbalance >= 6.0);
            let counts = longtail_counts(&sp).unwrap();
            proptest::prop_assert!(counts.windows(2).all(|w| w[0] >= w[1]));
            let ratio = counts[0] as f64 / counts[classes - 1] as f64;
            proptest::prop_assert!(
                ratio >= 0.9 * imbalance && ratio <= 1.1 * imbalance,
                "ratio {} for IF {}", ratio, imbalance
            );
        }

        #[test]
        fn partition_conserves_counts(
            seed in 0u64..1000,
            clients in 1usize..10,
            alpha in 0.05f64..20.0,
        ) {
            let counts = [61usize, 23, 7];
            let set = toy_set(&counts);
            let plan = dirichlet_partition(&set, clients, alpha, &mut RngStream::new(seed, "pp")).unwrap();
            for (class, &n) in counts.iter().enumerate() {
                proptest::prop_assert_eq!(plan.class_total(class), n);
            }
        }
    }
}
