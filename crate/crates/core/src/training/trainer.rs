use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::loss::cross_entropy;
use super::optim::{early_stop_check, lr_at_epoch, Sgd};
use crate::data::{augment, eval_transform, normalize, AugmentConfig, LoadedSplit, NormStats};
use crate::error::{Error, Result};
use crate::metrics::{compute_report, confusion, MetricsReport};
use crate::models::{save_weights, ModelGraph};
use crate::tensor::{Rng, Tensor};

/// Salt separating the augmentation streams from the shuffle stream.
const AUGMENT_STREAM: u64 = 0xA06_0E47;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr0: f64,
    pub momentum: f32,
    /// Epochs between learning-rate drops.
    pub lr_step: usize,
    pub lr_gamma: f64,
    pub patience: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { lr0: 0.01, momentum: 0.9, lr_step: 10, lr_gamma: 0.1, patience: 10, batch_size: 32, max_epochs: 100, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0) {
            return Err(Error::Config(format!("lr0 must be > 0, got {}", self.lr0)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must be in [0,1), got {}", self.momentum)));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be ≥ 1".into()));
        }
        if self.lr_step == 0 {
            return Err(Error::Config("lr_step must be ≥ 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be ≥ 1".into()));
        }
        if !(self.lr_gamma > 0.0) {
            return Err(Error::Config(format!("lr_gamma must be > 0, got {}", self.lr_gamma)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    /// Epoch at which early stopping fired, if it did.
    pub stopped_epoch: Option<usize>,
}

impl TrainingLog {
    pub const CSV_HEADER: &'static str = "epoch,lr,train_loss,train_acc,val_loss,val_acc";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{:.6}",
                r.epoch, r.lr, r.train_loss, r.train_acc, r.val_loss, r.val_acc
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn val_acc_history(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.val_acc).collect()
    }
}

/// Evaluation-ready inputs: resized and normalized once.
#[derive(Clone, Debug)]
pub struct PreparedSplit {
    pub inputs: Vec<Tensor>,
    pub labels: Vec<usize>,
}

impl PreparedSplit {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub fn prepare_eval(split: &LoadedSplit, target_size: usize, stats: &NormStats) -> PreparedSplit {
    PreparedSplit {
        inputs: split.images.par_iter().map(|img| eval_transform(img, target_size, stats)).collect(),
        labels: split.labels.clone(),
    }
}

pub struct TrainData {
    pub train: LoadedSplit,
    pub val: PreparedSplit,
    pub stats: NormStats,
    pub augment: AugmentConfig,
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub avg_loss: f64,
    pub report: MetricsReport,
    pub predictions: Vec<usize>,
}

/// Eval-mode logits for every sample, shape (N, num_classes).
pub fn predict(model: &mut ModelGraph, split: &PreparedSplit, batch_size: usize) -> Result<Vec<Tensor>> {
    let mut out = Vec::new();
    for chunk in split.inputs.chunks(batch_size.max(1)) {
        let refs: Vec<&Tensor> = chunk.iter().collect();
        out.push(model.forward(&Tensor::stack(&refs)?, false)?);
    }
    Ok(out)
}

/// Sample-weighted average loss and the full metric set, in eval mode.
pub fn evaluate(model: &mut ModelGraph, split: &PreparedSplit, batch_size: usize) -> Result<Evaluation> {
    if split.is_empty() {
        return Err(Error::Data("cannot evaluate an empty split".into()));
    }
    let mut loss_sum = 0.0f64;
    let mut predictions = Vec::with_capacity(split.len());
    let bs = batch_size.max(1);
    for (logits, labels) in predict(model, split, bs)?.iter().zip(split.labels.chunks(bs)) {
        let (loss, _) = cross_entropy(logits, labels)?;
        loss_sum += loss * labels.len() as f64;
        predictions.extend(logits.argmax_rows()?);
    }
    let avg_loss = loss_sum / split.len() as f64;
    let m = confusion(&predictions, &split.labels, model.config.num_classes)?;
    Ok(Evaluation { avg_loss, report: compute_report(&m, avg_loss)?, predictions })
}

fn train_epoch(
    model: &mut ModelGraph,
    data: &TrainData,
    cfg: &TrainConfig,
    opt: &mut Sgd,
    epoch: usize,
    lr: f32,
) -> Result<(f64, f64)> {
    let n = data.train.len();
    let mut order: Vec<usize> = (0..n).collect();
    Rng::derive(cfg.seed, epoch as u64, u64::MAX).shuffle(&mut order);
    let aug_seed = cfg.seed ^ AUGMENT_STREAM;
    let (mut loss_sum, mut correct) = (0.0f64, 0usize);
    for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
        let samples: Vec<Tensor> = idx
            .par_iter()
            .map(|&i| {
                let mut rng = Rng::derive(aug_seed, epoch as u64, i as u64);
                normalize(&augment(&data.train.images[i], &data.augment, &mut rng), &data.stats)
            })
            .collect();
        let labels: Vec<usize> = idx.iter().map(|&i| data.train.labels[i]).collect();
        let refs: Vec<&Tensor> = samples.iter().collect();
        let batch = Tensor::stack(&refs)?;
        let logits = model.forward(&batch, true)?;
        let (loss, grad) = cross_entropy(&logits, &labels)?;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss {loss} at epoch {epoch}, batch {b}")));
        }
        model.zero_grad();
        model.backward(&grad)?;
        opt.step(model.states_mut(), lr)?;
        loss_sum += loss * labels.len() as f64;
        correct += logits.argmax_rows()?.iter().zip(&labels).filter(|(p, t)| p == t).count();
    }
    Ok((loss_sum / n as f64, correct as f64 / n as f64))
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub log: TrainingLog,
    pub best_checkpoint: Option<PathBuf>,
}

/// Epoch loop: shuffled, augmented SGD steps with the stepped learning rate,
/// then validation. `best.nncp` in `out_dir` is rewritten whenever validation
/// accuracy strictly improves. Stops on early stopping or `max_epochs`.
pub fn train_loop(model: &mut ModelGraph, data: &TrainData, cfg: &TrainConfig, out_dir: &Path) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(Error::Data("training split is empty".into()));
    }
    let mut log = TrainingLog::default();
    let mut best: Option<(usize, f64)> = None;
    let mut best_checkpoint = None;
    let mut opt = Sgd::new(cfg.momentum)?;
    for epoch in 0..cfg.max_epochs {
        let lr = lr_at_epoch(epoch, cfg);
        let (train_loss, train_acc) = train_epoch(model, data, cfg, &mut opt, epoch, lr as f32)?;
        let val = evaluate(model, &data.val, cfg.batch_size)?;
        let record = EpochRecord { epoch, lr, train_loss, train_acc, val_loss: val.avg_loss, val_acc: val.report.accuracy };
        log::info!(
            "epoch {epoch:3} lr {lr:.0e} train loss {train_loss:.4} acc {train_acc:.4} | val loss {:.4} acc {:.4}",
            record.val_loss,
            record.val_acc
        );
        log.rows.push(record);
        if best.is_none_or(|(_, acc)| val.report.accuracy > acc) {
            best = Some((epoch, val.report.accuracy));
            fs::create_dir_all(out_dir)?;
            let path = out_dir.join("best.nncp");
            save_weights(model, &path)?;
            best_checkpoint = Some(path);
        }
        log.best_epoch = best.map(|(e, _)| e);
        if early_stop_check(&log.val_acc_history(), cfg.patience) {
            log.stopped_epoch = Some(epoch);
            log::info!("early stop at epoch {epoch} (best epoch {:?})", log.best_epoch);
            break;
        }
    }
    Ok(TrainOutcome { log, best_checkpoint })
}
