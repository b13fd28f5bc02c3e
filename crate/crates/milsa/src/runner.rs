//! The `run` command: execute the full cross-validation protocol for one
//! config and write every artifact into the output directory.

use std::path::Path;

use milsa_core::mil::sample_bags;
use milsa_core::train::{derive_seed, run_cv, FoldResult};

use crate::artifacts::{
    load_pool, write_checkpoint, write_history_csv, write_json, write_metrics_csv,
    write_summary_csv, Manifest, ManifestBag,
};
use crate::config::ExperimentConfig;
use crate::error::{data_io, CliError, Result};

/// Seed-mixing tags separating the sampler streams from model/shuffle
/// seeds derived elsewhere from the same protocol seed.
const TAG_DATASET: u64 = 0xD5;
const TAG_TEST: u64 = 0x7E57;

pub fn run(config_path: &Path) -> Result<()> {
    let cfg = ExperimentConfig::load(config_path)?;
    let rule = cfg.rule()?;
    let protocol = cfg.protocol_config()?;

    let pool = load_pool(&cfg.dataset.images, &cfg.dataset.labels)?;
    let model_spec = cfg.model_spec(pool.rows, pool.cols)?;

    let n_bags = cfg.dataset_bag_count();
    let bags = sample_bags(
        &pool,
        &rule,
        &cfg.bag_sampler(derive_seed(cfg.protocol.seed, TAG_DATASET, 0)),
        n_bags,
    )?;
    let test_bags = if cfg.sampler.test_bags > 0 {
        Some(sample_bags(
            &pool,
            &rule,
            &cfg.bag_sampler(derive_seed(cfg.protocol.seed, TAG_TEST, 0)),
            cfg.sampler.test_bags,
        )?)
    } else {
        None
    };

    let out = &cfg.output.dir;
    data_io(out, std::fs::create_dir_all(out))?;
    let history_dir = out.join("history");
    data_io(&history_dir, std::fs::create_dir_all(&history_dir))?;

    // Echo the resolved config so the run is self-describing.
    let resolved = toml::to_string_pretty(&cfg)
        .map_err(|e| CliError::Config(format!("serializing resolved config: {e}")))?;
    data_io(&out.join("config.toml"), std::fs::write(out.join("config.toml"), resolved))?;

    write_json(
        &out.join("manifest.json"),
        &Manifest {
            images: cfg.dataset.images.clone(),
            labels: cfg.dataset.labels.clone(),
            seed: cfg.protocol.seed,
            bags: bags.iter().map(ManifestBag::of).collect(),
            test_bags: test_bags
                .as_deref()
                .unwrap_or_default()
                .iter()
                .map(ManifestBag::of)
                .collect(),
        },
    )?;

    println!(
        "{}: {} bags ({} per training split), {} reps x {} folds",
        cfg.method_name(),
        bags.len(),
        cfg.sampler.train_bags,
        protocol.repetitions,
        protocol.folds,
    );

    let mut on_fold = |f: &FoldResult| {
        println!(
            "rep {} fold {}: auc {:.4} acc {:.4} ({} epochs{})",
            f.repetition,
            f.fold,
            f.report.auc,
            f.report.accuracy,
            f.history.len(),
            if f.stopped_early { ", early stop" } else { "" },
        );
    };
    let results = run_cv(
        &pool,
        &bags,
        &model_spec,
        &protocol,
        test_bags.as_deref(),
        Some(&mut on_fold),
    )?;

    write_metrics_csv(&out.join("metrics.csv"), &results.folds)?;
    write_summary_csv(&out.join("summary.csv"), &results.summary)?;
    for fold in &results.folds {
        write_history_csv(
            &history_dir.join(format!("rep{}_fold{}.csv", fold.repetition, fold.fold)),
            fold,
        )?;
    }
    if let Some(snapshot) = &results.checkpoint {
        write_checkpoint(
            &out.join("checkpoint.bin"),
            &out.join("checkpoint.json"),
            snapshot,
            &cfg.model,
            model_spec.input,
        )?;
    }

    for s in &results.summary {
        println!("{}: {:.4} +/- {:.4}", s.metric, s.mean, s.std);
    }
    Ok(())
}
