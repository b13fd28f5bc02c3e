//! Behavior of the training machinery: early stopping, fold planning and
//! an end-to-end sanity run on a trivially separable toy task.

use milsa_core::mil::{
    sample_bags, write_idx_images, write_idx_labels, AssumptionRule, BagSamplerConfig,
    InstancePool,
};
use milsa_core::nn::{LayerSpec, MilModel, ModelSpec};
use milsa_core::train::{
    derive_seed, evaluate, train_model, AdamConfig, EarlyStopper, FoldPlan, StopMetric,
    TrainConfig,
};
use milsa_core::ParamSet;

fn marker_params() -> ParamSet {
    let mut p = ParamSet::new();
    p.add("w", &[1], vec![0.0]).unwrap();
    p
}

#[test]
fn early_stopper_stops_after_window_without_improvement() {
    let mut params = marker_params();
    let mut stopper = EarlyStopper::new(5, false);
    // Loss improves at epoch 1 and then plateaus; with a window of 5 the
    // run consumes epochs 0..=7 and stops, keeping the epoch-1 snapshot.
    let losses = [1.0, 0.9, 0.95, 0.96, 0.96, 0.96, 0.96, 0.96, 0.96];
    let mut stopped_at = None;
    for (epoch, &loss) in losses.iter().enumerate() {
        params.get_mut(params.ids().next().unwrap()).value[0] = epoch as f64;
        if stopper.observe(epoch, loss, &params) {
            stopped_at = Some(epoch);
            break;
        }
    }
    assert_eq!(stopped_at, Some(7));
    assert_eq!(stopper.best_epoch(), Some(1));
    stopper.restore_best(&mut params);
    assert_eq!(params.by_name("w").unwrap().value[0], 1.0);
}

#[test]
fn early_stopper_tracks_maximum_for_auc() {
    let params = marker_params();
    let mut stopper = EarlyStopper::new(2, true);
    assert!(!stopper.observe(0, 0.6, &params));
    assert!(!stopper.observe(1, 0.7, &params));
    assert!(!stopper.observe(2, 0.65, &params));
    assert!(!stopper.observe(3, 0.65, &params));
    assert!(stopper.observe(4, 0.65, &params));
    assert_eq!(stopper.best_epoch(), Some(1));
}

#[test]
fn early_stopper_ties_do_not_count_as_improvement() {
    let params = marker_params();
    let mut stopper = EarlyStopper::new(1, false);
    assert!(!stopper.observe(0, 0.5, &params));
    assert!(!stopper.observe(1, 0.5, &params));
    assert!(stopper.observe(2, 0.5, &params));
    assert_eq!(stopper.best_epoch(), Some(0));
}

#[test]
fn fold_plan_partitions_evenly_and_rotates() {
    // Alternating labels: 12 positive, 11 negative.
    let labels: Vec<bool> = (0..23).map(|i| i % 2 == 0).collect();
    let plan = FoldPlan::new(&labels, 10, 7).unwrap();
    assert_eq!(plan.k(), 10);
    let sizes: Vec<usize> = plan.folds.iter().map(|f| f.len()).collect();
    assert!(sizes.iter().all(|&s| s == 2 || s == 3));
    assert_eq!(sizes.iter().sum::<usize>(), 23);

    let mut seen = vec![false; 23];
    for fold in &plan.folds {
        for &i in fold {
            assert!(!seen[i], "index {i} in two folds");
            seen[i] = true;
        }
    }
    assert!(seen.iter().all(|&s| s));

    for f in 0..10 {
        let (test, val, train) = plan.rotation(f);
        assert_eq!(test, &plan.folds[f][..]);
        assert_eq!(val, &plan.folds[(f + 1) % 10][..]);
        assert_eq!(test.len() + val.len() + train.len(), 23);
        for &i in test.iter().chain(val) {
            assert!(!train.contains(&i));
        }
    }

    assert!(FoldPlan::new(&labels[..5], 10, 0).is_err());
    assert!(FoldPlan::new(&labels[..10], 1, 0).is_err());
}

#[test]
fn fold_plan_stratifies_classes_across_folds() {
    // 20 positive + 20 negative over 10 folds: every fold must get an
    // exactly even class split.
    let labels: Vec<bool> = (0..40).map(|i| i < 20).collect();
    let plan = FoldPlan::new(&labels, 10, 3).unwrap();
    for fold in &plan.folds {
        assert_eq!(fold.len(), 4);
        assert_eq!(fold.iter().filter(|&&i| labels[i]).count(), 2);
    }
}

#[test]
fn derive_seed_is_deterministic_and_sensitive() {
    assert_eq!(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
    assert_ne!(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
    assert_ne!(derive_seed(1, 2, 3), derive_seed(2, 2, 3));
}

/// Pool where concept 1 instances are bright and everything else is dark:
/// separable by mean intensity, so a few epochs must reach a high AUC.
fn separable_pool() -> InstancePool {
    let size = 200;
    let side = 8;
    let mut pixels = Vec::with_capacity(size * side * side);
    let mut labels = Vec::with_capacity(size);
    for i in 0..size {
        let concept = (i % 4) as u8;
        let level: u8 = if concept == 1 { 230 } else { 25 };
        pixels.extend(std::iter::repeat_n(level, side * side));
        labels.push(concept);
    }
    InstancePool::from_idx(
        &write_idx_images(&pixels, size, side, side),
        &write_idx_labels(&labels),
    )
    .unwrap()
}

fn small_model(seed: u64) -> MilModel {
    MilModel::new(ModelSpec {
        layers: vec![
            LayerSpec::Flatten,
            LayerSpec::Linear { out_features: 8 },
            LayerSpec::Tanh,
        ],
        input: (1, 8, 8),
        attention_hidden: 4,
        self_attention: None,
        alpha_init: 1.0,
        seed,
    })
    .unwrap()
}

#[test]
fn training_learns_a_separable_toy_task() {
    let pool = separable_pool();
    let rule = AssumptionRule::Standard { concept: 1 };
    let cfg = BagSamplerConfig {
        mean: 6.0,
        stddev: 1.0,
        seed: 5,
        ..Default::default()
    };
    let bags = sample_bags(&pool, &rule, &cfg, 60).unwrap();
    // Stratified splits so validation and test both carry both classes.
    let mut pos: Vec<_> = bags.iter().filter(|b| b.label).cloned().collect();
    let mut neg: Vec<_> = bags.iter().filter(|b| !b.label).cloned().collect();
    let mut take = |k: usize| {
        let mut out = pos.split_off(pos.len() - k);
        out.extend(neg.split_off(neg.len() - k));
        out
    };
    let test = take(5);
    let val = take(5);
    let train = take(20);

    let mut model = small_model(3);
    let train_cfg = TrainConfig {
        max_epochs: 30,
        patience: 5,
        stop_metric: StopMetric::ValLoss,
        adam: AdamConfig {
            lr: 1e-2,
            ..Default::default()
        },
    };
    let outcome = train_model(&mut model, &pool, &train, &val, &train_cfg, 11).unwrap();
    assert!(!outcome.history.is_empty());
    // Train loss must drop substantially from its starting point.
    let first = outcome.history.first().unwrap().train_loss;
    let last = outcome.history.last().unwrap().train_loss;
    assert!(last < 0.5 * first, "no learning: {first} -> {last}");

    let (_, scores, labels) = evaluate(&model, &pool, &test).unwrap();
    let auc = milsa_core::metrics::auc(&scores, &labels).unwrap();
    assert!(auc > 0.95, "toy AUC {auc}");
}

#[test]
fn training_is_deterministic_for_a_fixed_seed() {
    let pool = separable_pool();
    let rule = AssumptionRule::Standard { concept: 1 };
    let cfg = BagSamplerConfig {
        mean: 5.0,
        stddev: 1.0,
        seed: 9,
        ..Default::default()
    };
    let bags = sample_bags(&pool, &rule, &cfg, 20).unwrap();
    let (train, val) = bags.split_at(14);
    let run = || {
        let mut model = small_model(17);
        let train_cfg = TrainConfig {
            max_epochs: 3,
            ..Default::default()
        };
        train_model(&mut model, &pool, train, val, &train_cfg, 23).unwrap();
        model
            .params
            .iter()
            .flat_map(|p| p.value.iter().map(|v| v.to_bits()))
            .collect::<Vec<u64>>()
    };
    assert_eq!(run(), run());
}
