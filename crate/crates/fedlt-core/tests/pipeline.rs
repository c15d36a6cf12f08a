//! Cross-module checks that need the whole training pipeline.

use fedlt_core::datagen::{
    dirichlet_partition, longtail_counts, make_gaussian_mixture, split_by_plan, DatasetSpec,
};
use fedlt_core::evalkit::{accuracy, spearman};
use fedlt_core::federation::{
    run_stage1, ClientState, FedConfig, GlobalState, SequentialExecutor, TrainingMode,
};
use fedlt_core::model::{
    client_update_joint, init_trainable_head, Activation, Backbone, FeatureSource,
    LocalUpdateConfig,
};
use fedlt_core::numerics::{RngStream, SgdConfig};
use fedlt_core::ssec::HeadRole;

/// With zero class separation the features carry no label signal, so a trained
/// linear probe lands at chance level.
#[test]
fn zero_separation_probe_is_chance_level() {
    let classes = 5;
    let spec = DatasetSpec {
        classes,
        feature_dim: 10,
        samples_per_head_class: 60,
        imbalance_factor: 1.0,
        class_separation: 0.0,
        noise_scale: 1.0,
    };
    for seed in [1u64, 2, 3] {
        let mut rng = RngStream::new(seed, "chance");
        let train = make_gaussian_mixture(&spec, &[60; 5], &mut rng).unwrap();
        let test = make_gaussian_mixture(&spec, &[40; 5], &mut rng).unwrap();

        // Single linear layer + trainable head = a linear probe.
        let backbone = Backbone::new(&[10, 10], Activation::Identity, &mut rng).unwrap();
        let head = init_trainable_head(10, classes, HeadRole::AuxGlobal, &mut rng).unwrap();
        let cfg = LocalUpdateConfig {
            sgd: SgdConfig { learning_rate: 0.05, steps: 1, momentum: 0.0 },
            epochs: 10,
            batch_size: 32,
            feature_source: FeatureSource::PostUpdate,
        };
        let out = client_update_joint(&backbone, &head, &train, &cfg, &mut rng).unwrap();
        let acc = accuracy(&out.backbone, &out.aux_head, &test).unwrap();
        let chance = 1.0 / classes as f64;
        assert!(
            (acc - chance).abs() <= 0.1,
            "seed {seed}: probe accuracy {acc} vs chance {chance}"
        );
    }
}

/// Short federated run on a long-tailed partition: training loss falls and
/// per-class personal-head norms track local class counts.
#[test]
fn stage1_smoke_loss_falls_and_norms_track_counts() {
    let classes = 6;
    let d = 24;
    let spec = DatasetSpec {
        classes,
        feature_dim: 12,
        samples_per_head_class: 120,
        imbalance_factor: 20.0,
        class_separation: 2.5,
        noise_scale: 1.0,
    };
    for seed in [5u64, 6, 7] {
        let mut rng = RngStream::new(seed, "smoke");
        let counts = longtail_counts(&spec).unwrap();
        let train = make_gaussian_mixture(&spec, &counts, &mut rng).unwrap();
        let plan = dirichlet_partition(&train, 4, 0.5, &mut rng).unwrap();
        let parts = split_by_plan(&train, &plan).unwrap();

        let mut clients: Vec<ClientState> = parts
            .into_iter()
            .enumerate()
            .map(|(id, part)| ClientState {
                id,
                train: part,
                test: fedlt_core::datagen::LabeledSet::empty(12, classes),
                personal: init_trainable_head(d, classes, HeadRole::Personal, &mut rng).unwrap(),
            })
            .collect();
        let frozen = fedlt_core::ssec::make_dense_etf(d, classes, &mut rng).unwrap();
        let global = GlobalState {
            backbone: Backbone::new(&[12, 24, d], Activation::Rectifier, &mut rng).unwrap(),
            aux_head: init_trainable_head(d, classes, HeadRole::AuxGlobal, &mut rng).unwrap(),
            round: 0,
        };
        let cfg = FedConfig {
            clients: 4,
            rounds: 60,
            local_epochs: 3,
            participation: 1.0,
            sgd: SgdConfig { learning_rate: 0.05, steps: 1, momentum: 0.0 },
            batch_size: 16,
            seed,
            feature_source: FeatureSource::PostUpdate,
        };
        let (_, reports) = run_stage1(
            global,
            &mut clients,
            TrainingMode::FrozenClassifier(&frozen),
            &cfg,
            None,
            &SequentialExecutor,
        )
        .unwrap();
        let first = reports.first().unwrap().train_loss.unwrap();
        let last = reports.last().unwrap().train_loss.unwrap();
        assert!(last < first, "seed {seed}: loss {first} -> {last}");

        // Personal-head column norms correlate with local class cardinality.
        let mut rhos = Vec::new();
        for client in &clients {
            let present: Vec<usize> = (0..classes)
                .filter(|&c| client.train.class_counts()[c] > 0)
                .collect();
            if present.len() < 3 {
                continue;
            }
            let norms: Vec<f64> = present.iter().map(|&c| client.personal.col_norm(c)).collect();
            let counts: Vec<f64> = present
                .iter()
                .map(|&c| client.train.class_counts()[c] as f64)
                .collect();
            if let Some(rho) = spearman(&norms, &counts) {
                rhos.push(rho);
            }
        }
        let mean_rho = rhos.iter().sum::<f64>() / rhos.len() as f64;
        assert!(mean_rho >= 0.5, "seed {seed}: mean Spearman {mean_rho}");
    }
}
