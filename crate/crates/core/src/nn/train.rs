//! Fixed-budget training with periodic validation.

use serde::{Deserialize, Serialize};

use super::{Loss, Model, Tensor};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    SgdMomentum,
    #[default]
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "TrainConfig::default_steps")]
    pub steps: usize,
    #[serde(default = "TrainConfig::default_eval_every")]
    pub eval_every: usize,
    #[serde(default = "TrainConfig::default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "TrainConfig::default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    #[serde(default)]
    pub loss: Loss,
    #[serde(default)]
    pub seed: u64,
}

impl TrainConfig {
    fn default_steps() -> usize {
        2048
    }

    fn default_eval_every() -> usize {
        256
    }

    fn default_batch_size() -> usize {
        32
    }

    fn default_learning_rate() -> f64 {
        1e-3
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::config("train.steps", "must be >= 1"));
        }
        if self.eval_every == 0 || !self.steps.is_multiple_of(self.eval_every) {
            return Err(Error::config("train.eval_every", "must divide train.steps"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size", "must be >= 1"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::config("train.learning_rate", "must be positive"));
        }
        Ok(())
    }

    pub fn n_evaluations(&self) -> usize {
        self.steps / self.eval_every
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: Self::default_steps(),
            eval_every: Self::default_eval_every(),
            batch_size: Self::default_batch_size(),
            learning_rate: Self::default_learning_rate(),
            optimizer: OptimizerKind::Adam,
            loss: Loss::Mse,
            seed: 0,
        }
    }
}

/// Inputs `[n, ...]`, targets `[n, n_outputs]` and per-sample weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Tensor,
    pub targets: Tensor,
    pub weights: Vec<f64>,
}

impl Dataset {
    pub fn new(inputs: Tensor, targets: Tensor, weights: Vec<f64>) -> Result<Self> {
        let n = inputs.shape().first().copied().unwrap_or(0);
        if n == 0 {
            return Err(Error::Empty("dataset".into()));
        }
        if targets.shape().first() != Some(&n) || targets.shape().len() != 2 {
            return Err(Error::shape("dataset targets", &[n, 1], targets.shape()));
        }
        if weights.len() != n {
            return Err(Error::shape("dataset weights", &[n], &[weights.len()]));
        }
        Ok(Self {
            inputs,
            targets,
            weights,
        })
    }

    /// Dataset with unit weights.
    pub fn unweighted(inputs: Tensor, targets: Tensor) -> Result<Self> {
        let n = inputs.shape().first().copied().unwrap_or(0);
        Self::new(inputs, targets, vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.inputs.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn subset(&self, idx: &[usize]) -> (Tensor, Tensor, Vec<f64>) {
        (
            self.inputs.gather(idx),
            self.targets.gather(idx),
            idx.iter().map(|&i| self.weights[i]).collect(),
        )
    }
}

const EVAL_CHUNK: usize = 512;

/// Weighted-mean loss over a whole dataset, evaluated in chunks.
pub fn evaluate_loss(model: &Model, data: &Dataset, loss: Loss) -> Result<f64> {
    let mut total = 0.0;
    let mut w_sum = 0.0;
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let (x, y, w) = data.subset(chunk);
        let (t, ws) = model.loss_sums(&x, &y, loss, &w)?;
        total += t;
        w_sum += ws;
    }
    Ok(if w_sum > 0.0 { total / w_sum } else { 0.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Validation loss after every `eval_every` steps.
    pub val_trace: Vec<f64>,
    /// Index into `val_trace` of the retained weights.
    pub best_eval: usize,
    pub best_val_loss: f64,
    /// Training-set loss of the retained weights.
    pub final_train_loss: f64,
}

enum OptState {
    Sgd {
        velocity: Vec<Vec<f64>>,
    },
    Adam {
        m: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
        t: i32,
    },
}

const MOMENTUM: f64 = 0.9;
const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl OptState {
    fn new(kind: OptimizerKind, model: &Model) -> Self {
        let zeros = || -> Vec<Vec<f64>> {
            model
                .params()
                .iter()
                .flatten()
                .map(|p| vec![0.0; p.len()])
                .collect()
        };
        match kind {
            OptimizerKind::SgdMomentum => OptState::Sgd { velocity: zeros() },
            OptimizerKind::Adam => OptState::Adam {
                m: zeros(),
                v: zeros(),
                t: 0,
            },
        }
    }

    fn step(&mut self, model: &mut Model, lr: f64) {
        let params = model.params_mut().iter_mut().flatten();
        match self {
            OptState::Sgd { velocity } => {
                for (p, vel) in params.zip(velocity.iter_mut()) {
                    let g = p.grad().map(<[f64]>::to_vec).unwrap_or_default();
                    for ((w, v), g) in p.data_mut().iter_mut().zip(vel.iter_mut()).zip(g) {
                        *v = MOMENTUM * *v - lr * g;
                        *w += *v;
                    }
                }
            }
            OptState::Adam { m, v, t } => {
                *t += 1;
                let c1 = 1.0 - BETA1.powi(*t);
                let c2 = 1.0 - BETA2.powi(*t);
                for ((p, m), v) in params.zip(m.iter_mut()).zip(v.iter_mut()) {
                    let g = p.grad().map(<[f64]>::to_vec).unwrap_or_default();
                    for (((w, m), v), g) in p
                        .data_mut()
                        .iter_mut()
                        .zip(m.iter_mut())
                        .zip(v.iter_mut())
                        .zip(g)
                    {
                        *m = BETA1 * *m + (1.0 - BETA1) * g;
                        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                        *w -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
                    }
                }
            }
        }
    }
}

/// Trains `model` in place for `config.steps` minibatch steps, evaluating
/// on `val` every `config.eval_every` steps. The weights with the lowest
/// validation loss are kept.
pub fn train(
    model: &mut Model,
    train_set: &Dataset,
    val: &Dataset,
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if train_set.is_empty() || val.is_empty() {
        return Err(Error::Empty("training or validation set".into()));
    }
    let mut gen = rng::seeded(config.seed);
    let mut opt = OptState::new(config.optimizer, model);
    let batch = config.batch_size.min(train_set.len());
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    rng::shuffle(&mut gen, &mut order);
    let mut cursor = 0;

    let mut trace = Vec::with_capacity(config.n_evaluations());
    let mut best: Option<(f64, usize, Model)> = None;
    for step in 1..=config.steps {
        if cursor + batch > order.len() {
            rng::shuffle(&mut gen, &mut order);
            cursor = 0;
        }
        let (x, y, w) = train_set.subset(&order[cursor..cursor + batch]);
        cursor += batch;
        let l = model.backward(&x, &y, config.loss, &w)?;
        if !l.is_finite() {
            return Err(Error::Diverged { step, loss: l });
        }
        opt.step(model, config.learning_rate);

        if step % config.eval_every == 0 {
            let vl = evaluate_loss(model, val, config.loss)?;
            if !vl.is_finite() {
                return Err(Error::Diverged { step, loss: vl });
            }
            if best.as_ref().is_none_or(|(b, _, _)| vl < *b) {
                best = Some((vl, trace.len(), model.clone()));
            }
            trace.push(vl);
        }
    }
    let (best_val_loss, best_eval, best_model) = best.expect("at least one evaluation");
    *model = best_model;
    let final_train_loss = evaluate_loss(model, train_set, config.loss)?;
    Ok(TrainReport {
        val_trace: trace,
        best_eval,
        best_val_loss,
        final_train_loss,
    })
}
