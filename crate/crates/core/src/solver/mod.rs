//! Trainable solvers: the feed-forward baseline and the sentence-level and two-level VAEs.

pub mod ffnn;
pub mod vae;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::AdamConfig;

/// Optimization settings shared by all solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Gradient shards per batch. 1 is bitwise reproducible; more shards change the
    /// summation order, so results differ from the single-shard run.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            lr: 0.001,
            batch_size: 100,
            epochs: 120,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("{what} must be positive")));
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config("learning rate must be finite and non-negative".into()));
        }
        if self.batch_size == 0 {
            return bad("batch size");
        }
        if self.epochs == 0 {
            return bad("epochs");
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return Err(Error::Config("Adam betas must lie in (0, 1)".into()));
        }
        if self.eps <= 0.0 {
            return bad("epsilon");
        }
        if self.threads == 0 {
            return bad("threads");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

/// One line of a training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub train_sentence_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub train_task_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dev_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dev_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dev_f1: Option<f64>,
}

impl EpochLog {
    pub(crate) fn new(epoch: usize, train_loss: f64) -> EpochLog {
        EpochLog {
            epoch,
            train_loss,
            train_sentence_loss: None,
            train_task_loss: None,
            dev_loss: None,
            dev_accuracy: None,
            dev_f1: None,
        }
    }
}

pub fn write_log(log: &[EpochLog]) -> Result<String> {
    let mut s = String::new();
    for l in log {
        s.push_str(&serde_json::to_string(l)?);
        s.push('\n');
    }
    Ok(s)
}

/// Example order for one epoch.
pub(crate) fn epoch_order(n: usize, seed: u64, solver: &str, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut crate::seed::stream(seed, &format!("{solver}:shuffle:{epoch}")));
    order
}

pub(crate) fn finite(loss: f64, epoch: usize, batch: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged { epoch, batch })
    }
}
