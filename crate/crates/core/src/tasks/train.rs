use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Task, TaskModel};
use crate::error::{Error, Result};
use crate::extraction::UNK_ID;
use crate::nn::{argmax, AdamConfig, AdamState, Real};
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub embedding_dim: usize,
    /// `None` for the completion model, which has no dropout layer.
    pub dropout: Option<f64>,
    pub optimizer: String,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn cs_default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            embedding_dim: 100,
            dropout: Some(0.5),
            optimizer: "adam".into(),
            batch_size: 512,
            epochs: 300,
            seed: 0,
        }
    }

    pub fn cc_default() -> Self {
        TrainConfig {
            dropout: None,
            ..Self::cs_default()
        }
    }

    pub fn default_for(task: Task) -> Self {
        match task {
            Task::Cs => Self::cs_default(),
            Task::Cc => Self::cc_default(),
        }
    }

    pub fn validate(&self, task: Task) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.embedding_dim == 0 || self.batch_size == 0 || self.epochs == 0 {
            return bad("embedding_dim, batch_size and epochs must be positive".into());
        }
        if self.optimizer != "adam" {
            return bad(format!("unsupported optimizer `{}` (only adam)", self.optimizer));
        }
        match (task, self.dropout) {
            (Task::Cc, Some(_)) => bad("the completion model has no dropout layer; set dropout to null".into()),
            (Task::Cs, Some(p)) if !(0.0..1.0).contains(&p) => bad(format!("dropout {p} outside [0, 1)")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Running accuracy over the epoch's training passes (dropout active).
    pub train_acc: f64,
    pub val_acc: Option<f64>,
    pub loss: f64,
}

/// `epoch,train_acc,val_acc,loss`, with an optional `# header` line.
pub fn epoch_log_csv(header: Option<&str>, logs: &[EpochLog]) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        let _ = writeln!(out, "# {h}");
    }
    out.push_str("epoch,train_acc,val_acc,loss\n");
    for l in logs {
        let val = l.val_acc.map(|v| format!("{v:.4}")).unwrap_or_default();
        let _ = writeln!(out, "{},{:.4},{},{:.6}", l.epoch, l.train_acc, val, l.loss);
    }
    out
}

fn is_correct(predicted: usize, label: u32) -> bool {
    label != UNK_ID && predicted == label as usize
}

/// Fixed-epoch minibatch Adam. Each epoch reshuffles with a generator
/// derived from `(seed, epoch)`; gradients are averaged per batch.
pub fn train<F: Real, M: TaskModel<F>>(
    model: &mut M,
    samples: &[M::Input],
    validation: &[M::Input],
    cfg: &TrainConfig,
) -> Result<Vec<EpochLog>> {
    if samples.is_empty() {
        return Err(Error::Empty("training split has no samples".into()));
    }
    let mut adam = AdamState::<F>::new(AdamConfig {
        lr: cfg.learning_rate,
        ..AdamConfig::default()
    });
    let mut drop_rng = rng_for(cfg.seed, "dropout");
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut logs = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng_for(cfg.seed, &format!("epoch-{epoch}")));
        let (mut loss, mut correct) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            for p in model.params_mut() {
                p.zero_grad();
            }
            for &i in batch {
                let x = &samples[i];
                let (l, pred) = model.accumulate_gradients(x, &mut drop_rng)?;
                loss += l.f64();
                correct += is_correct(pred, M::label(x)) as usize;
            }
            let scale = F::one() / F::of(batch.len() as f64);
            let mut params = model.params_mut();
            for p in params.iter_mut() {
                p.scale_grad(scale);
            }
            adam.step(&mut params);
        }
        let val_acc = if validation.is_empty() {
            None
        } else {
            Some(evaluate_accuracy(model, validation)?)
        };
        let n = samples.len() as f64;
        logs.push(EpochLog {
            epoch,
            train_acc: 100.0 * correct as f64 / n,
            val_acc,
            loss: loss / n,
        });
        log::debug!("epoch {epoch}: loss {:.4}", loss / n);
    }
    for p in model.params_mut() {
        p.clear_grad();
    }
    Ok(logs)
}

/// Inference-mode argmax for every sample.
pub fn predict_all<F: Real, M: TaskModel<F>>(model: &M, samples: &[M::Input]) -> Result<Vec<usize>> {
    samples.iter().map(|x| Ok(argmax(&model.forward(x, None)?.probs))).collect()
}

/// Exact-match accuracy in percent. UNK-labelled samples always count as
/// failures.
pub fn evaluate_accuracy<F: Real, M: TaskModel<F>>(model: &M, samples: &[M::Input]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("cannot evaluate accuracy on an empty split".into()));
    }
    let preds = predict_all(model, samples)?;
    let correct = preds.iter().zip(samples).filter(|(p, x)| is_correct(**p, M::label(x))).count();
    Ok(100.0 * correct as f64 / samples.len() as f64)
}
