//! Experiment configuration: TOML schema, validation with field-level
//! messages, and conversion into the core crate's domain types.

use std::path::{Path, PathBuf};

use milsa_core::kernels::KernelKind;
use milsa_core::mil::{AssumptionRule, BagSamplerConfig};
use milsa_core::nn::{lenet5, LayerSpec, ModelSpec};
use milsa_core::train::{AdamConfig, ProtocolConfig, StopMetric, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Environment variable overriding the directory dataset paths resolve
/// against (default: the config file's directory).
pub const DATA_ROOT_ENV: &str = "MILSA_DATA_ROOT";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub rule: RuleConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub protocol: ProtocolSection,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub images: PathBuf,
    pub labels: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleConfig {
    /// "standard" | "presence" | "threshold"
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concept: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concepts: Option<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<(u8, u32)>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub mean: f64,
    pub stddev: f64,
    pub min_size: usize,
    pub balance: bool,
    /// Bags available for training in each fold rotation; the sampled
    /// dataset is scaled up so the k-2 training folds hold this many.
    pub train_bags: usize,
    /// When > 0, an independently sampled test set of this many bags is
    /// used instead of the held-out test fold.
    pub test_bags: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            mean: 10.0,
            stddev: 2.0,
            min_size: 1,
            balance: true,
            train_bags: 50,
            test_bags: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerConfig {
    Conv2d {
        out_channels: usize,
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
    },
    MaxPool2d {
        window: usize,
    },
    Linear {
        out_features: usize,
    },
    Relu,
    Tanh,
    Flatten,
}

fn one() -> usize {
    1
}

impl LayerConfig {
    fn to_spec(&self) -> LayerSpec {
        match *self {
            LayerConfig::Conv2d {
                out_channels,
                kernel,
                stride,
            } => LayerSpec::Conv2d {
                out_channels,
                kernel,
                stride,
            },
            LayerConfig::MaxPool2d { window } => LayerSpec::MaxPool2d { window },
            LayerConfig::Linear { out_features } => LayerSpec::Linear { out_features },
            LayerConfig::Relu => LayerSpec::Relu,
            LayerConfig::Tanh => LayerSpec::Tanh,
            LayerConfig::Flatten => LayerSpec::Flatten,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// "lenet5" or "custom" (with [[model.layers]]).
    pub extractor: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layers: Option<Vec<LayerConfig>>,
    /// (C, H, W) of one instance; defaults to the dataset's image shape
    /// with one channel.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<[usize; 3]>,
    pub attention_hidden: usize,
    /// "none" or a kernel name: dot | rbf | inverse_quadratic | laplace |
    /// module.
    pub self_attention: String,
    pub alpha_init: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            extractor: "lenet5".into(),
            layers: None,
            input: None,
            attention_hidden: 128,
            self_attention: "none".into(),
            alpha_init: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let d = AdamConfig::default();
        Self {
            lr: d.lr,
            beta1: d.beta1,
            beta2: d.beta2,
            eps: d.eps,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    pub folds: usize,
    pub repetitions: usize,
    pub patience: usize,
    pub max_epochs: usize,
    /// "val_loss" | "val_auc"
    pub stop_metric: String,
    pub seed: u64,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self {
            folds: 10,
            repetitions: 5,
            patience: 5,
            max_epochs: 200,
            stop_metric: "val_loss".into(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

fn field_err(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

impl ExperimentConfig {
    /// Parse and validate a config file. Dataset paths are resolved
    /// relative to `MILSA_DATA_ROOT` when set, else the config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let root = match std::env::var_os(DATA_ROOT_ENV) {
            Some(dir) => PathBuf::from(dir),
            None => path.parent().unwrap_or(Path::new(".")).to_path_buf(),
        };
        for p in [&mut cfg.dataset.images, &mut cfg.dataset.labels] {
            if p.is_relative() {
                *p = root.join(&p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.rule()?;
        self.model_layers()?;
        self.kernel()?;
        self.stop_metric()?;
        let s = &self.sampler;
        if s.mean <= 0.0 || s.stddev < 0.0 {
            return Err(field_err("sampler.mean/stddev", "need mean > 0, stddev >= 0"));
        }
        if s.min_size < 1 {
            return Err(field_err("sampler.min_size", "must be >= 1"));
        }
        if s.train_bags < self.protocol.folds {
            return Err(field_err(
                "sampler.train_bags",
                format!("must be >= protocol.folds ({})", self.protocol.folds),
            ));
        }
        let o = &self.optimizer;
        if o.lr <= 0.0 || o.eps <= 0.0 {
            return Err(field_err("optimizer.lr/eps", "must be positive"));
        }
        if !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) {
            return Err(field_err("optimizer.beta1/beta2", "must be in [0, 1)"));
        }
        let p = &self.protocol;
        if p.folds < 3 {
            return Err(field_err(
                "protocol.folds",
                "need >= 3 folds (one test, one validation, the rest training)",
            ));
        }
        if p.repetitions == 0 {
            return Err(field_err("protocol.repetitions", "must be >= 1"));
        }
        if p.max_epochs == 0 {
            return Err(field_err("protocol.max_epochs", "must be >= 1"));
        }
        if self.model.attention_hidden == 0 {
            return Err(field_err("model.attention_hidden", "must be >= 1"));
        }
        if self.model.alpha_init <= 0.0 {
            return Err(field_err("model.alpha_init", "must be > 0"));
        }
        Ok(())
    }

    pub fn rule(&self) -> Result<AssumptionRule> {
        let rule = match self.rule.kind.as_str() {
            "standard" => AssumptionRule::Standard {
                concept: self
                    .rule
                    .concept
                    .ok_or_else(|| field_err("rule.concept", "required for kind = \"standard\""))?,
            },
            "presence" => AssumptionRule::Presence {
                concepts: self
                    .rule
                    .concepts
                    .clone()
                    .ok_or_else(|| field_err("rule.concepts", "required for kind = \"presence\""))?,
            },
            "threshold" => AssumptionRule::Threshold {
                pairs: self
                    .rule
                    .pairs
                    .clone()
                    .ok_or_else(|| field_err("rule.pairs", "required for kind = \"threshold\""))?,
            },
            other => {
                return Err(field_err(
                    "rule.kind",
                    format!("unknown kind {other:?} (standard | presence | threshold)"),
                ))
            }
        };
        rule.validate()?;
        Ok(rule)
    }

    fn model_layers(&self) -> Result<Vec<LayerSpec>> {
        match (self.model.extractor.as_str(), &self.model.layers) {
            ("lenet5", None) => Ok(lenet5()),
            ("lenet5", Some(_)) => Err(field_err(
                "model.layers",
                "cannot combine extractor = \"lenet5\" with explicit layers",
            )),
            ("custom", Some(layers)) if !layers.is_empty() => {
                Ok(layers.iter().map(LayerConfig::to_spec).collect())
            }
            ("custom", _) => Err(field_err(
                "model.layers",
                "extractor = \"custom\" requires a non-empty [[model.layers]] list",
            )),
            (other, _) => Err(field_err(
                "model.extractor",
                format!("unknown extractor {other:?} (lenet5 | custom)"),
            )),
        }
    }

    pub fn kernel(&self) -> Result<Option<KernelKind>> {
        match self.model.self_attention.as_str() {
            "none" => Ok(None),
            name => Ok(Some(KernelKind::from_name(name)?)),
        }
    }

    fn stop_metric(&self) -> Result<StopMetric> {
        match self.protocol.stop_metric.as_str() {
            "val_loss" => Ok(StopMetric::ValLoss),
            "val_auc" => Ok(StopMetric::ValAuc),
            other => Err(field_err(
                "protocol.stop_metric",
                format!("unknown metric {other:?} (val_loss | val_auc)"),
            )),
        }
    }

    /// Model spec for a dataset of (rows, cols) images. The seed is a
    /// placeholder; the protocol derives one per (repetition, fold).
    pub fn model_spec(&self, rows: usize, cols: usize) -> Result<ModelSpec> {
        if let Some(input) = self.model.input {
            if input != [1, rows, cols] {
                return Err(field_err(
                    "model.input",
                    format!("{input:?} does not match dataset images 1x{rows}x{cols}"),
                ));
            }
        }
        Ok(ModelSpec {
            layers: self.model_layers()?,
            input: (1, rows, cols),
            attention_hidden: self.model.attention_hidden,
            self_attention: self.kernel()?,
            alpha_init: self.model.alpha_init,
            seed: 0,
        })
    }

    pub fn bag_sampler(&self, seed: u64) -> BagSamplerConfig {
        BagSamplerConfig {
            mean: self.sampler.mean,
            stddev: self.sampler.stddev,
            min_size: self.sampler.min_size,
            balance: self.sampler.balance,
            seed,
        }
    }

    /// Total bags to sample so that the k-2 training folds of a rotation
    /// hold `train_bags` bags (rounded up).
    pub fn dataset_bag_count(&self) -> usize {
        let k = self.protocol.folds;
        (self.sampler.train_bags * k).div_ceil(k - 2)
    }

    pub fn protocol_config(&self) -> Result<ProtocolConfig> {
        Ok(ProtocolConfig {
            folds: self.protocol.folds,
            repetitions: self.protocol.repetitions,
            seed: self.protocol.seed,
            train: TrainConfig {
                max_epochs: self.protocol.max_epochs,
                patience: self.protocol.patience,
                stop_metric: self.stop_metric()?,
                adam: AdamConfig {
                    lr: self.optimizer.lr,
                    beta1: self.optimizer.beta1,
                    beta2: self.optimizer.beta2,
                    eps: self.optimizer.eps,
                },
            },
        })
    }

    /// Short label for cross-run comparisons: the pooling method in use.
    pub fn method_name(&self) -> String {
        match self.model.self_attention.as_str() {
            "none" => "abmilp".into(),
            kernel => format!("sa-abmilp-{kernel}"),
        }
    }
}
