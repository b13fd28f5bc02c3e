//! File formats around a run: dataset loading (gzip or raw IDX), the
//! metrics/summary/history CSVs, the bag manifest and the parameter
//! checkpoint (flat little-endian f64 binary + JSON sidecar).

use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use milsa_core::mil::{Bag, InstancePool};
use milsa_core::nn::MilModel;
use milsa_core::train::{FoldResult, MetricSummary, ParamSnapshot};
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{data_io, CliError, Result};

/// Read a file, transparently gunzipping when it starts with the gzip
/// magic bytes.
pub fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>> {
    let raw = data_io(path, std::fs::read(path))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        data_io(path, GzDecoder::new(&raw[..]).read_to_end(&mut out))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

pub fn load_pool(images: &Path, labels: &Path) -> Result<InstancePool> {
    let image_bytes = read_maybe_gzip(images)?;
    let label_bytes = read_maybe_gzip(labels)?;
    InstancePool::from_idx(&image_bytes, &label_bytes)
        .map_err(|e| CliError::Data(format!("{} / {}: {e}", images.display(), labels.display())))
}

/// Full-precision float formatting for CSV cells: Rust's shortest
/// round-trip representation.
fn fmt(v: f64) -> String {
    format!("{v}")
}

pub fn write_metrics_csv(path: &Path, folds: &[FoldResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    w.write_record([
        "repetition",
        "fold",
        "accuracy",
        "precision",
        "recall",
        "f_score",
        "auc",
    ])
    .map_err(io)?;
    for f in folds {
        let r = &f.report;
        w.write_record([
            f.repetition.to_string(),
            f.fold.to_string(),
            fmt(r.accuracy),
            fmt(r.precision),
            fmt(r.recall),
            fmt(r.f_score),
            fmt(r.auc),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn write_summary_csv(path: &Path, summary: &[MetricSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    w.write_record(["metric", "mean", "std"]).map_err(io)?;
    for s in summary {
        w.write_record([s.metric.to_string(), fmt(s.mean), fmt(s.std)])
            .map_err(io)?;
    }
    w.flush()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn write_history_csv(path: &Path, fold: &FoldResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    w.write_record(["epoch", "train_loss", "val_loss", "val_auc"])
        .map_err(io)?;
    for h in &fold.history {
        w.write_record([
            h.epoch.to_string(),
            fmt(h.train_loss),
            fmt(h.val_loss),
            h.val_auc.map(fmt).unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Everything needed to rebuild the exact bag sets of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub images: PathBuf,
    pub labels: PathBuf,
    pub seed: u64,
    pub bags: Vec<ManifestBag>,
    /// Present when an independently sampled test set was used.
    pub test_bags: Vec<ManifestBag>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestBag {
    pub indices: Vec<usize>,
    pub label: bool,
}

impl ManifestBag {
    pub fn of(bag: &Bag) -> Self {
        Self {
            indices: bag.indices.clone(),
            label: bag.label,
        }
    }

    pub fn to_bag(&self, pool: &InstancePool) -> Result<Bag> {
        if let Some(&bad) = self.indices.iter().find(|&&i| i >= pool.len()) {
            return Err(CliError::Data(format!(
                "manifest bag index {bad} out of range for pool of {}",
                pool.len()
            )));
        }
        let concepts = self.indices.iter().map(|&i| pool.concepts[i]).collect();
        Ok(Bag {
            indices: self.indices.clone(),
            concepts,
            label: self.label,
        })
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    data_io(path, std::fs::write(path, text))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = data_io(path, std::fs::read_to_string(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// JSON sidecar of a checkpoint: parameter layout plus the model config
/// needed to rebuild the network the values belong to.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub names: Vec<String>,
    pub shapes: Vec<Vec<usize>>,
    pub model: ModelConfig,
    /// Instance shape (C, H, W).
    pub input: [usize; 3],
}

pub fn write_checkpoint(
    bin_path: &Path,
    meta_path: &Path,
    snapshot: &ParamSnapshot,
    model: &ModelConfig,
    input: (usize, usize, usize),
) -> Result<()> {
    let mut bytes = Vec::new();
    for values in &snapshot.values {
        for v in values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    data_io(bin_path, std::fs::write(bin_path, bytes))?;
    write_json(
        meta_path,
        &CheckpointMeta {
            names: snapshot.names.clone(),
            shapes: snapshot.shapes.clone(),
            model: model.clone(),
            input: [input.0, input.1, input.2],
        },
    )
}

/// Load a checkpoint into a freshly built model, verifying the parameter
/// layout matches.
pub fn load_checkpoint(meta_path: &Path, model: &mut MilModel) -> Result<()> {
    let meta: CheckpointMeta = read_json(meta_path)?;
    let bin_path = meta_path.with_extension("bin");
    let bytes = data_io(&bin_path, std::fs::read(&bin_path))?;
    let expected: usize = meta.shapes.iter().map(|s| s.iter().product::<usize>()).sum();
    if bytes.len() != expected * 8 {
        return Err(CliError::Data(format!(
            "{}: expected {} bytes of f64 values, found {}",
            bin_path.display(),
            expected * 8,
            bytes.len()
        )));
    }
    if meta.names.len() != model.params.len() {
        return Err(CliError::Data(format!(
            "checkpoint has {} parameters, model expects {}",
            meta.names.len(),
            model.params.len()
        )));
    }
    let mut offset = 0;
    for ((name, shape), param) in meta
        .names
        .iter()
        .zip(&meta.shapes)
        .zip(model.params.iter_mut())
    {
        if *name != param.name || *shape != param.shape {
            return Err(CliError::Data(format!(
                "checkpoint layout mismatch at {name} {shape:?} (model has {} {:?})",
                param.name, param.shape
            )));
        }
        for v in param.value.iter_mut() {
            let mut buf = [0u8; 8];
            buf.copy_from_slice(&bytes[offset..offset + 8]);
            *v = f64::from_le_bytes(buf);
            offset += 8;
        }
    }
    Ok(())
}
