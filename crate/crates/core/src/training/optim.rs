use std::collections::HashMap;

use super::trainer::TrainConfig;
use crate::error::{Error, Result};
use crate::layers::LayerState;
use crate::tensor::Tensor;

/// SGD with classical momentum: `v ← μ·v + g`, `p ← p − lr·v`.
///
/// Velocity buffers are created lazily (zero) per parameter name and only
/// for trainable state; frozen parameters are never written.
#[derive(Clone, Debug, Default)]
pub struct Sgd {
    pub momentum: f32,
    velocity: HashMap<String, Tensor>,
}

impl Sgd {
    pub fn new(momentum: f32) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::Config(format!("momentum must be in [0,1), got {momentum}")));
        }
        Ok(Self { momentum, velocity: HashMap::new() })
    }

    pub fn velocity(&self, name: &str) -> Option<&Tensor> {
        self.velocity.get(name)
    }

    pub fn step<'a>(&mut self, states: impl IntoIterator<Item = &'a mut LayerState>, lr: f32) -> Result<()> {
        for state in states {
            if !state.trainable {
                continue;
            }
            for p in &mut state.params {
                p.value.check_same_shape(&p.grad)?;
                let v = self.velocity.entry(p.name.clone()).or_insert_with(|| Tensor::zeros_like(&p.value));
                v.check_same_shape(&p.value)?;
                for ((vi, &gi), pi) in v.data_mut().iter_mut().zip(p.grad.data()).zip(p.value.data_mut()) {
                    *vi = self.momentum * *vi + gi;
                    *pi -= lr * *vi;
                }
            }
        }
        Ok(())
    }
}

/// `lr0 · gamma^floor(epoch / lr_step)`, applied as repeated multiplication.
pub fn lr_at_epoch(epoch: usize, cfg: &TrainConfig) -> f64 {
    let drops = epoch / cfg.lr_step.max(1);
    (0..drops).fold(cfg.lr0, |lr, _| lr * cfg.lr_gamma)
}

/// True iff the last `patience` entries all fail to strictly exceed the best
/// value recorded before them.
pub fn early_stop_check(val_acc_history: &[f64], patience: usize) -> bool {
    let n = val_acc_history.len();
    if patience == 0 || n <= patience {
        return false;
    }
    let best_before = val_acc_history[..n - patience].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    val_acc_history[n - patience..].iter().all(|&v| v <= best_before)
}
