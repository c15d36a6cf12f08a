// Scratch probe of the desk-scale benchmark (deleted before ship).
use fedlt_core::datagen::*;
use fedlt_core::evalkit::*;
use fedlt_core::federation::*;
use fedlt_core::model::*;
use fedlt_core::numerics::{RngStream, SgdConfig};
use fedlt_core::realign::*;
use fedlt_core::ssec::*;
use std::time::Instant;

fn main() {
    let t_all = Instant::now();
    for seed in [11u64, 12, 13] {
        let t0 = Instant::now();
        let spec = DatasetSpec {
            classes: 10, feature_dim: 20, samples_per_head_class: 500,
            imbalance_factor: 100.0, class_separation: 2.5, noise_scale: 1.0,
        };
        let d = 64usize;
        let root = RngStream::new(seed, "fedlt");
        let counts = longtail_counts(&spec).unwrap();
        let centers = class_centers(&spec, &mut root.derive("data/centers")).unwrap();
        let train = sample_mixture(&spec, &centers, &counts, &mut root.derive("data/train")).unwrap();
        let test = sample_mixture(&spec, &centers, &vec![200; 10], &mut root.derive("data/test")).unwrap();
        let plan = dirichlet_partition(&train, 8, 0.5, &mut root.derive("data/partition")).unwrap();
        let parts = split_by_plan(&train, &plan).unwrap();
        let split = split_classes(&counts, 0.75, 0.95).unwrap();
        let local_tests: Vec<_> = (0..8).map(|k| make_local_test(&test, &plan, k, 200, &mut root.derive_idx("data/localtest", k)).unwrap()).collect();

        let ssec_cfg = SsecConfig::default();
        let (ssec, mask, diag) = build_ssec(&ssec_cfg, d, 10, &mut root.derive("ssec")).unwrap();
        println!("seed {seed}: ssec built ({:.1?}) norm_var {:.2e} min_angle {:.1}", t0.elapsed(), diag.norm_var, diag.min_angle_deg);

        let backbone0 = Backbone::new(&[20, 64, d], Activation::Rectifier, &mut root.derive("init/backbone")).unwrap();
        let aux0 = init_trainable_head(d, 10, HeadRole::AuxGlobal, &mut root.derive("init/aux")).unwrap();
        let fed = FedConfig {
            clients: 8, rounds: 200, local_epochs: 5, participation: 1.0,
            sgd: SgdConfig { learning_rate: 0.05, steps: 1, momentum: 0.0 },
            batch_size: 32, seed, feature_source: FeatureSource::PostUpdate,
        };

        // ---- fedloge ----
        let mut clients: Vec<ClientState> = parts.iter().cloned().enumerate().map(|(id, tr)| ClientState {
            id, train: tr, test: local_tests[id].clone(),
            personal: init_trainable_head(d, 10, HeadRole::Personal, &mut root.derive_idx("init/phi", id)).unwrap(),
        }).collect();
        let global = GlobalState { backbone: backbone0.clone(), aux_head: aux0.clone(), round: 0 };
        let (gstate, reports) = run_stage1(global, &mut clients, TrainingMode::FrozenClassifier(&ssec), &fed, None, &SequentialExecutor).unwrap();
        let psi = gstate.aux_head.clone();
        let psi_al = ga_fr(&psi).unwrap();
        let gm_al = evaluate_gm(&gstate.backbone, &psi_al, &test, &split).unwrap();
        let gm_raw = evaluate_gm(&gstate.backbone, &psi, &test, &split).unwrap();
        let gm_frozen = evaluate_gm(&gstate.backbone, &ssec, &test, &split).unwrap();

        // spearman
        let mut rhos = vec![];
        for c in &clients {
            let present: Vec<usize> = (0..10).filter(|&j| c.train.class_counts()[j] > 0).collect();
            if present.len() < 3 { continue; }
            let norms: Vec<f64> = present.iter().map(|&j| c.personal.col_norm(j)).collect();
            let cnts: Vec<f64> = present.iter().map(|&j| c.train.class_counts()[j] as f64).collect();
            if let Some(r) = spearman(&norms, &cnts) { rhos.push(r); }
        }
        let rho = rhos.iter().sum::<f64>() / rhos.len() as f64;

        // PM variants
        let ft_cfg = SgdConfig { learning_rate: 0.01, steps: 1, momentum: 0.0 };
        let mut pm_raw = 0.0; let mut pm_lafr = 0.0; let mut pm_final = 0.0; let mut gm_local = 0.0; let mut n_eval = 0;
        for c in &clients {
            if c.test.is_empty() { continue; }
            let phi_l = la_fr(&psi, &c.personal).unwrap();
            let phi_f = local_finetune(&gstate.backbone, &phi_l, &c.train, 15, &ft_cfg, 32, &mut root.derive_idx("finetune", c.id)).unwrap();
            pm_raw += accuracy(&gstate.backbone, &c.personal, &c.test).unwrap();
            pm_lafr += accuracy(&gstate.backbone, &phi_l, &c.test).unwrap();
            pm_final += accuracy(&gstate.backbone, &phi_f, &c.test).unwrap();
            gm_local += accuracy(&gstate.backbone, &psi_al, &c.test).unwrap();
            n_eval += 1;
        }
        pm_raw /= n_eval as f64; pm_lafr /= n_eval as f64; pm_final /= n_eval as f64; gm_local /= n_eval as f64;

        // pruning + degeneration on fedloge model
        let asc = pruning_sweep(&gstate.backbone, &ssec, &test, PruneOrder::AscendingMean, &[0.0, 0.5]).unwrap();
        let desc = pruning_sweep(&gstate.backbone, &ssec, &test, PruneOrder::DescendingMean, &[0.0, 0.5]).unwrap();
        let mut v_masked = 0.0; let mut v_top = 0.0;
        for class in 0..10 {
            let prof = degeneration_profile(&gstate.backbone, &test, class, Some(&mask)).unwrap();
            let flags = prof.masked.as_ref().unwrap();
            let masked: Vec<f64> = prof.rel_variance.iter().zip(flags).filter(|(_, &m)| m).map(|(v, _)| *v).collect();
            let unmasked: Vec<f64> = prof.rel_variance.iter().zip(flags).filter(|(_, &m)| !m).map(|(v, _)| *v).collect();
            let q = unmasked.len() / 4;
            v_masked += masked.iter().sum::<f64>() / masked.len() as f64;
            v_top += unmasked[..q].iter().sum::<f64>() / q as f64; // top quartile by mean (already mean-sorted)
        }
        v_masked /= 10.0; v_top /= 10.0;

        // ---- fedavg ----
        let mut fa_clients: Vec<ClientState> = parts.iter().cloned().enumerate().map(|(id, tr)| ClientState {
            id, train: tr, test: local_tests[id].clone(),
            personal: init_trainable_head(d, 10, HeadRole::Personal, &mut root.derive_idx("init/phi", id)).unwrap(),
        }).collect();
        let global = GlobalState { backbone: backbone0.clone(), aux_head: aux0.clone(), round: 0 };
        let (fa_state, _) = run_stage1(global, &mut fa_clients, TrainingMode::JointHead, &fed, None, &SequentialExecutor).unwrap();
        let fa_gm = evaluate_gm(&fa_state.backbone, &fa_state.aux_head, &test, &split).unwrap();
        let mut fa_pm = 0.0; let mut n2 = 0;
        for c in &fa_clients { if !c.test.is_empty() { fa_pm += accuracy(&fa_state.backbone, &fa_state.aux_head, &c.test).unwrap(); n2 += 1; } }
        fa_pm /= n2 as f64;

        println!("seed {seed} ({:.1?}): loss {:.3}->{:.3}", t0.elapsed(), reports[0].train_loss.unwrap(), reports.last().unwrap().train_loss.unwrap());
        println!("  fedloge: GM(psi')={:.4} GM(psi)={:.4} GM(frozen)={:.4} few(psi')={:.4}", gm_al.gm_accuracy, gm_raw.gm_accuracy, gm_frozen.gm_accuracy, gm_al.few_accuracy.unwrap());
        println!("  fedavg:  GM={:.4} few={:.4} PM={:.4}", fa_gm.gm_accuracy, fa_gm.few_accuracy.unwrap(), fa_pm);
        println!("  PM: raw={pm_raw:.4} lafr={pm_lafr:.4} final={pm_final:.4} gm_local={gm_local:.4} rho={rho:.3}");
        println!("  prune@0.5: asc={:.4} desc={:.4} (baseline {:.4}) | degen: masked={:.3e} top_unmasked={:.3e}", asc[1].1, desc[1].1, asc[0].1, v_masked, v_top);
    }
    println!("total: {:.1?}", t_all.elapsed());
}
