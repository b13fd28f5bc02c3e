//! Optimization and the experiment protocol: Adam with bias correction,
//! early stopping with best-snapshot restore, and repetition x k-fold
//! cross-validation.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{MilError, Result};
use crate::fmath;
use crate::metrics::{self, MetricsReport};
use crate::mil::{Bag, InstancePool};
use crate::nn::{bce_loss, MilModel, ModelSpec};
use crate::rng::SeededRng;
use crate::tensor::ParamSet;

#[derive(Debug, Clone)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias-corrected first/second moment estimates. Gradients are
/// left untouched; the caller zeroes them between steps.
pub struct Adam {
    pub cfg: AdamConfig,
    step_count: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(cfg: AdamConfig, params: &ParamSet) -> Self {
        let m = params.iter().map(|p| vec![0.0; p.value.len()]).collect();
        let v = params.iter().map(|p| vec![0.0; p.value.len()]).collect();
        Self {
            cfg,
            step_count: 0,
            m,
            v,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn step(&mut self, params: &mut ParamSet) -> Result<()> {
        self.step_count += 1;
        let t = self.step_count as i32;
        let c = &self.cfg;
        let bias1 = 1.0 - fmath::powf(c.beta1, t as f64);
        let bias2 = 1.0 - fmath::powf(c.beta2, t as f64);
        for (pi, p) in params.iter_mut().enumerate() {
            for (j, g) in p.grad.iter().enumerate() {
                if !g.is_finite() {
                    return Err(MilError::NonFinite { op: "adam_step" });
                }
                let m = &mut self.m[pi][j];
                let v = &mut self.v[pi][j];
                *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                p.value[j] -= c.lr * m_hat / (fmath::sqrt(v_hat) + c.eps);
            }
        }
        Ok(())
    }
}

/// Validation metric driving early stopping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopMetric {
    ValLoss,
    ValAuc,
}

/// Stops training once `window` epochs pass without a new best metric, and
/// restores the snapshot taken at the best epoch.
pub struct EarlyStopper {
    pub window: usize,
    higher_is_better: bool,
    best: Option<(usize, f64, Vec<Vec<f64>>)>,
}

impl EarlyStopper {
    pub fn new(window: usize, higher_is_better: bool) -> Self {
        Self {
            window,
            higher_is_better,
            best: None,
        }
    }

    fn improves(&self, metric: f64) -> bool {
        match &self.best {
            None => true,
            Some((_, best, _)) => {
                if self.higher_is_better {
                    metric > *best
                } else {
                    metric < *best
                }
            }
        }
    }

    /// Record this epoch's metric; returns true when training should stop
    /// (strictly more than `window` epochs past the best).
    pub fn observe(&mut self, epoch: usize, metric: f64, params: &ParamSet) -> bool {
        if self.improves(metric) {
            self.best = Some((epoch, metric, params.snapshot()));
            return false;
        }
        let best_epoch = self.best.as_ref().map(|(e, _, _)| *e).unwrap_or(0);
        epoch - best_epoch > self.window
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best.as_ref().map(|(e, _, _)| *e)
    }

    pub fn restore_best(&self, params: &mut ParamSet) {
        if let Some((_, _, snapshot)) = &self.best {
            params.restore(snapshot);
        }
    }
}

/// k folds of bag indices; rotation f tests on fold f and validates on the
/// next one.
#[derive(Debug, Clone)]
pub struct FoldPlan {
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    /// Stratified assignment: positives and negatives are shuffled
    /// separately and dealt round-robin, so every fold carries a near-even
    /// class mix (sizes still differ by at most one).
    pub fn new(labels: &[bool], k: usize, seed: u64) -> Result<Self> {
        let n_bags = labels.len();
        if k < 2 {
            return Err(MilError::Config("need at least 2 folds".into()));
        }
        if n_bags < k {
            return Err(MilError::Config(format!(
                "fewer bags ({n_bags}) than folds ({k})"
            )));
        }
        let mut rng = SeededRng::with_stream(seed, 0xf01d);
        let mut pos: Vec<usize> = (0..n_bags).filter(|&i| labels[i]).collect();
        let mut neg: Vec<usize> = (0..n_bags).filter(|&i| !labels[i]).collect();
        rng.shuffle(&mut pos);
        rng.shuffle(&mut neg);
        let mut folds = vec![Vec::new(); k];
        for (j, i) in pos.into_iter().chain(neg).enumerate() {
            folds[j % k].push(i);
        }
        Ok(Self { folds })
    }

    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// (test, validation, training) index sets for rotation `f`.
    pub fn rotation(&self, f: usize) -> (&[usize], &[usize], Vec<usize>) {
        let k = self.k();
        let val = (f + 1) % k;
        let train: Vec<usize> = (0..k)
            .filter(|&i| i != f && i != val)
            .flat_map(|i| self.folds[i].iter().copied())
            .collect();
        (&self.folds[f], &self.folds[val], train)
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub patience: usize,
    pub stop_metric: StopMetric,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 200,
            patience: 5,
            stop_metric: StopMetric::ValLoss,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// None when the validation split is single-class.
    pub val_auc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

/// Mean BCE loss and per-bag probabilities over a bag set.
pub fn evaluate(
    model: &MilModel,
    pool: &InstancePool,
    bags: &[Bag],
) -> Result<(f64, Vec<f64>, Vec<bool>)> {
    let mut loss_sum = 0.0;
    let mut scores = Vec::with_capacity(bags.len());
    let mut labels = Vec::with_capacity(bags.len());
    for bag in bags {
        let fwd = model.forward_bag(&bag.gather(pool), bag.len())?;
        loss_sum += bce_loss(&fwd.p, bag.label)?.item()?;
        scores.push(fwd.p.item()?);
        labels.push(bag.label);
    }
    Ok((loss_sum / bags.len() as f64, scores, labels))
}

/// Batch-size-1 training over shuffled bags with per-epoch validation,
/// early stopping and best-snapshot restore.
pub fn train_model(
    model: &mut MilModel,
    pool: &InstancePool,
    train_bags: &[Bag],
    val_bags: &[Bag],
    cfg: &TrainConfig,
    shuffle_seed: u64,
) -> Result<TrainOutcome> {
    if train_bags.is_empty() || val_bags.is_empty() {
        return Err(MilError::Training("empty train or validation split".into()));
    }
    let mut adam = Adam::new(cfg.adam.clone(), &model.params);
    let higher_is_better = cfg.stop_metric == StopMetric::ValAuc;
    let mut stopper = EarlyStopper::new(cfg.patience, higher_is_better);
    let mut rng = SeededRng::with_stream(shuffle_seed, 0x5f);
    let mut history = Vec::new();
    let mut stopped_early = false;
    let mut order: Vec<usize> = (0..train_bags.len()).collect();
    for epoch in 0..cfg.max_epochs {
        rng.shuffle(&mut order);
        let mut train_loss_sum = 0.0;
        for &bi in &order {
            let bag = &train_bags[bi];
            let mut step = || -> Result<f64> {
                let fwd = model.forward_bag(&bag.gather(pool), bag.len())?;
                let loss = bce_loss(&fwd.p, bag.label)?;
                let value = loss.item()?;
                fwd.tape.backward(&loss)?;
                fwd.tape.accumulate_grads(&mut model.params);
                Ok(value)
            };
            let value = match step() {
                Ok(v) => v,
                Err(e) => {
                    return Err(MilError::Training(format!(
                        "epoch {epoch}, bag {bi}: {e}"
                    )))
                }
            };
            adam.step(&mut model.params)?;
            model.params.zero_grad();
            train_loss_sum += value;
        }
        let (val_loss, scores, labels) = evaluate(model, pool, val_bags)?;
        let val_auc = metrics::auc(&scores, &labels).ok();
        history.push(EpochRecord {
            epoch,
            train_loss: train_loss_sum / train_bags.len() as f64,
            val_loss,
            val_auc,
        });
        let metric = match cfg.stop_metric {
            StopMetric::ValLoss => val_loss,
            StopMetric::ValAuc => val_auc.ok_or_else(|| {
                MilError::Training("val AUC undefined (single-class validation fold)".into())
            })?,
        };
        if stopper.observe(epoch, metric, &model.params) {
            stopped_early = true;
            break;
        }
    }
    stopper.restore_best(&mut model.params);
    Ok(TrainOutcome {
        history,
        best_epoch: stopper.best_epoch(),
        stopped_early,
    })
}

/// Cross-validation protocol settings.
#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    pub folds: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub train: TrainConfig,
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub repetition: usize,
    pub fold: usize,
    pub report: MetricsReport,
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

#[derive(Debug, Clone)]
pub struct MetricSummary {
    pub metric: &'static str,
    pub mean: f64,
    pub std: f64,
}

/// Snapshot of trained parameter values with their names and shapes.
#[derive(Debug, Clone)]
pub struct ParamSnapshot {
    pub names: Vec<String>,
    pub shapes: Vec<Vec<usize>>,
    pub values: Vec<Vec<f64>>,
}

impl ParamSnapshot {
    pub fn of(params: &ParamSet) -> Self {
        Self {
            names: params.iter().map(|p| p.name.clone()).collect(),
            shapes: params.iter().map(|p| p.shape.clone()).collect(),
            values: params.iter().map(|p| p.value.clone()).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CvResults {
    pub folds: Vec<FoldResult>,
    pub summary: Vec<MetricSummary>,
    /// Trained parameters of (repetition 0, fold 0), for attention dumps.
    pub checkpoint: Option<ParamSnapshot>,
}

/// Stable seed mixing (splitmix64 over the concatenated words).
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base ^ a.wrapping_mul(0x9e3779b97f4a7c15) ^ b.wrapping_mul(0xbf58476d1ce4e5b9);
    for _ in 0..2 {
        z = z.wrapping_add(0x9e3779b97f4a7c15);
        let mut x = z;
        x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
        z = x ^ (x >> 31);
    }
    z
}

/// Full protocol: for every repetition and fold rotation, train on the 8
/// remaining folds, early-stop on the validation fold and evaluate on the
/// test fold (or on `test_override` bags when given).
pub fn run_cv(
    pool: &InstancePool,
    bags: &[Bag],
    model_spec: &ModelSpec,
    protocol: &ProtocolConfig,
    test_override: Option<&[Bag]>,
    mut progress: Option<&mut dyn FnMut(&FoldResult)>,
) -> Result<CvResults> {
    if protocol.repetitions == 0 {
        return Err(MilError::Config("need at least one repetition".into()));
    }
    let mut folds_out = Vec::new();
    let mut checkpoint = None;
    for rep in 0..protocol.repetitions {
        let labels: Vec<bool> = bags.iter().map(|b| b.label).collect();
        let plan = FoldPlan::new(&labels, protocol.folds, derive_seed(protocol.seed, rep as u64, 0))?;
        for fold in 0..plan.k() {
            let (test_idx, val_idx, train_idx) = plan.rotation(fold);
            let take = |idx: &[usize]| -> Vec<Bag> { idx.iter().map(|&i| bags[i].clone()).collect() };
            let train_bags = take(&train_idx);
            let val_bags = take(val_idx);
            let test_bags: Vec<Bag> = match test_override {
                Some(t) => t.to_vec(),
                None => take(test_idx),
            };
            let mut spec = model_spec.clone();
            spec.seed = derive_seed(protocol.seed, rep as u64, 1 + fold as u64);
            let mut model = MilModel::new(spec)?;
            let outcome = train_model(
                &mut model,
                pool,
                &train_bags,
                &val_bags,
                &protocol.train,
                derive_seed(protocol.seed, rep as u64, 1000 + fold as u64),
            )?;
            let (_, scores, labels) = evaluate(&model, pool, &test_bags)?;
            let report = metrics::report(&scores, &labels)?;
            if rep == 0 && fold == 0 {
                checkpoint = Some(ParamSnapshot::of(&model.params));
            }
            let result = FoldResult {
                repetition: rep,
                fold,
                report,
                history: outcome.history,
                best_epoch: outcome.best_epoch,
                stopped_early: outcome.stopped_early,
            };
            if let Some(cb) = progress.as_deref_mut() {
                cb(&result);
            }
            folds_out.push(result);
        }
    }
    let summary = summarize(&folds_out);
    Ok(CvResults {
        folds: folds_out,
        summary,
        checkpoint,
    })
}

/// Mean and population std of each metric over all (repetition, fold) runs.
pub fn summarize(folds: &[FoldResult]) -> Vec<MetricSummary> {
    let extractors: [(&'static str, fn(&MetricsReport) -> f64); 5] = [
        ("accuracy", |r| r.accuracy),
        ("precision", |r| r.precision),
        ("recall", |r| r.recall),
        ("f_score", |r| r.f_score),
        ("auc", |r| r.auc),
    ];
    extractors
        .iter()
        .map(|(name, get)| {
            let xs: Vec<f64> = folds.iter().map(|f| get(&f.report)).collect();
            let mean = xs.iter().sum::<f64>() / xs.len().max(1) as f64;
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
                / xs.len().max(1) as f64;
            MetricSummary {
                metric: name,
                mean,
                std: fmath::sqrt(var),
            }
        })
        .collect()
}
