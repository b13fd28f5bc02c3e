//! The `dump-attention` and `compare` commands.

use std::path::{Path, PathBuf};

use milsa_core::nn::MilModel;
use serde::Serialize;

use crate::artifacts::{load_checkpoint, load_pool, read_json, write_json, CheckpointMeta, Manifest};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Serialize)]
struct AttentionRecord {
    bag: usize,
    label: bool,
    /// Bag probability.
    p: f64,
    /// Pooling weights over instances (sums to 1).
    weights: Vec<f64>,
    /// Self-attention map (rows sum to 1), absent without the layer.
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<Vec<Vec<f64>>>,
    /// Index of the highest-weight instance.
    top_instance: usize,
    /// The beta row for that instance: which instances it attends to.
    #[serde(skip_serializing_if = "Option::is_none")]
    top_instance_attention: Option<Vec<f64>>,
}

/// Re-run a trained checkpoint over the bags of a manifest and export the
/// attention structure per bag as JSON.
pub fn dump_attention(checkpoint: &Path, manifest_path: &Path, out: &Path) -> Result<()> {
    let meta: CheckpointMeta = read_json(checkpoint)?;
    let manifest: Manifest = read_json(manifest_path)?;
    let pool = load_pool(&manifest.images, &manifest.labels)?;
    if meta.input != [1, pool.rows, pool.cols] {
        return Err(CliError::Data(format!(
            "checkpoint expects input {:?}, dataset provides 1x{}x{}",
            meta.input, pool.rows, pool.cols
        )));
    }

    // Rebuild the architecture from the sidecar, then overwrite the fresh
    // initialization with the stored values.
    let shell = ExperimentConfig {
        dataset: crate::config::DatasetConfig {
            images: manifest.images.clone(),
            labels: manifest.labels.clone(),
        },
        rule: crate::config::RuleConfig {
            kind: "standard".into(),
            concept: Some(0),
            concepts: None,
            pairs: None,
        },
        sampler: Default::default(),
        model: meta.model.clone(),
        optimizer: Default::default(),
        protocol: Default::default(),
        output: crate::config::OutputConfig {
            dir: PathBuf::new(),
        },
    };
    let spec = shell.model_spec(pool.rows, pool.cols)?;
    let mut model = MilModel::new(spec)?;
    load_checkpoint(checkpoint, &mut model)?;

    let mut records = Vec::new();
    for (i, mbag) in manifest.bags.iter().enumerate() {
        let bag = mbag.to_bag(&pool)?;
        let fwd = model
            .forward_bag(&bag.gather(&pool), bag.len())
            .map_err(|e| CliError::Numeric(format!("bag {i}: {e}")))?;
        let weights = fwd.weights.data().to_vec();
        let top_instance = weights
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(j, _)| j)
            .unwrap_or(0);
        let beta = fwd.beta.as_ref().map(|b| {
            b.data()
                .chunks(bag.len())
                .map(|row| row.to_vec())
                .collect::<Vec<_>>()
        });
        let top_instance_attention = beta.as_ref().map(|b| b[top_instance].clone());
        records.push(AttentionRecord {
            bag: i,
            label: bag.label,
            p: fwd.p.item().map_err(|e| CliError::Numeric(e.to_string()))?,
            weights,
            beta,
            top_instance,
            top_instance_attention,
        });
    }
    write_json(out, &records)?;
    println!("wrote attention maps for {} bags to {}", records.len(), out.display());
    Ok(())
}

#[derive(Debug, Clone)]
struct RunStats {
    method: String,
    train_bags: usize,
    auc_mean: f64,
    auc_std: f64,
    runs: usize,
}

fn read_run(dir: &Path) -> Result<RunStats> {
    let cfg_path = dir.join("config.toml");
    let text = std::fs::read_to_string(&cfg_path)
        .map_err(|e| CliError::Data(format!("{}: {e}", cfg_path.display())))?;
    let cfg: ExperimentConfig = toml::from_str(&text)
        .map_err(|e| CliError::Data(format!("{}: {e}", cfg_path.display())))?;

    let metrics_path = dir.join("metrics.csv");
    let mut reader = csv::Reader::from_path(&metrics_path)
        .map_err(|e| CliError::Data(format!("{}: {e}", metrics_path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", metrics_path.display())))?
        .clone();
    let auc_col = headers
        .iter()
        .position(|h| h == "auc")
        .ok_or_else(|| CliError::Data(format!("{}: no auc column", metrics_path.display())))?;
    let mut aucs = Vec::new();
    for record in reader.records() {
        let record =
            record.map_err(|e| CliError::Data(format!("{}: {e}", metrics_path.display())))?;
        let v: f64 = record[auc_col]
            .parse()
            .map_err(|e| CliError::Data(format!("{}: bad auc value: {e}", metrics_path.display())))?;
        aucs.push(v);
    }
    if aucs.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no metric rows",
            metrics_path.display()
        )));
    }
    let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
    let var = aucs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / aucs.len() as f64;
    Ok(RunStats {
        method: cfg.method_name(),
        train_bags: cfg.sampler.train_bags,
        auc_mean: mean,
        auc_std: var.sqrt(),
        runs: aucs.len(),
    })
}

/// Aggregate several completed runs into one method x training-bag-count
/// AUC table for external plotting.
pub fn compare(dirs: &[PathBuf], out: &Path) -> Result<()> {
    if dirs.len() < 2 {
        return Err(CliError::Config(
            "compare needs at least two run directories".into(),
        ));
    }
    let mut rows: Vec<RunStats> = dirs.iter().map(|d| read_run(d)).collect::<Result<_>>()?;
    rows.sort_by(|a, b| (&a.method, a.train_bags).cmp(&(&b.method, b.train_bags)));

    let mut w =
        csv::Writer::from_path(out).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
    let io = |e: csv::Error| CliError::Data(format!("{}: {e}", out.display()));
    w.write_record(["method", "train_bags", "auc_mean", "auc_std", "runs"])
        .map_err(io)?;
    for r in &rows {
        w.write_record([
            r.method.clone(),
            r.train_bags.to_string(),
            format!("{}", r.auc_mean),
            format!("{}", r.auc_std),
            r.runs.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
    println!("wrote comparison of {} runs to {}", dirs.len(), out.display());
    Ok(())
}
