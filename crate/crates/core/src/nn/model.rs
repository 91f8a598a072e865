use serde::{Deserialize, Serialize};

use super::layer::{self, sigmoid, LayerSpec};
use super::Tensor;
use crate::error::{Error, Result};
use crate::rng;

/// Output head of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Head {
    /// Identity over the final `[n_outputs]` features.
    Regression { n_outputs: usize },
    /// Sigmoid over a single logit.
    BinaryClassifier,
}

impl Head {
    pub fn n_outputs(&self) -> usize {
        match *self {
            Head::Regression { n_outputs } => n_outputs,
            Head::BinaryClassifier => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// Per-sample input shape (no batch axis).
    pub input_shape: Vec<usize>,
    #[serde(default)]
    pub layers: Vec<LayerSpec>,
    pub head: Head,
}

impl ModelSpec {
    /// Per-sample shapes: the input followed by every layer's output.
    /// Fails on the first layer whose input does not fit.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        if self.input_shape.is_empty() || self.input_shape.contains(&0) {
            return Err(Error::config("input_shape", "extents must be >= 1"));
        }
        let mut shapes = vec![self.input_shape.clone()];
        for (i, l) in self.layers.iter().enumerate() {
            let next = l
                .output_shape(shapes.last().unwrap())
                .map_err(|e| match e {
                    Error::ShapeMismatch {
                        expected, actual, ..
                    } => Error::ShapeMismatch {
                        location: format!("layer {i} ({})", l.name()),
                        expected,
                        actual,
                    },
                    Error::InvalidConfig { message, .. } => {
                        Error::config(format!("layers[{i}] ({})", l.name()), message)
                    }
                    other => other,
                })?;
            shapes.push(next);
        }
        let last = shapes.last().unwrap();
        let want = [self.head.n_outputs()];
        if last.as_slice() != want {
            return Err(Error::shape("head", &want, last));
        }
        Ok(shapes)
    }

    pub fn n_params(&self) -> u64 {
        self.layers.iter().map(LayerSpec::n_params).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    #[default]
    Mse,
    /// Binary cross-entropy on the classifier probability, with the
    /// probability clamped to `[1e-7, 1 - 1e-7]` inside the log.
    WeightedBce,
}

const PROB_CLAMP: f64 = 1e-7;

/// A built model: spec plus parameter tensors per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    shapes: Vec<Vec<usize>>,
    params: Vec<Vec<Tensor>>,
}

impl Model {
    /// Shape-checks `spec` and initializes weights uniformly in
    /// `±sqrt(6 / fan_in)` (biases zero) from `seed`.
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        let shapes = spec.shapes()?;
        let mut gen = rng::seeded(seed);
        let params = spec
            .layers
            .iter()
            .map(|l| {
                l.param_shapes()
                    .into_iter()
                    .map(|(name, shape, fan_in)| {
                        let mut t = Tensor::zeros(&shape);
                        if name != "bias" {
                            let a = (6.0 / fan_in.max(1) as f64).sqrt();
                            for v in t.data_mut() {
                                *v = a * (2.0 * rng::uniform(&mut gen) - 1.0);
                            }
                        }
                        t
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            spec,
            shapes,
            params,
        })
    }

    /// Builds a model from explicit parameter tensors (shapes must match).
    pub fn from_params(spec: ModelSpec, params: Vec<Vec<Tensor>>) -> Result<Self> {
        let shapes = spec.shapes()?;
        if params.len() != spec.layers.len() {
            return Err(Error::shape(
                "model params",
                &[spec.layers.len()],
                &[params.len()],
            ));
        }
        for (i, (l, p)) in spec.layers.iter().zip(&params).enumerate() {
            let want = l.param_shapes();
            if want.len() != p.len()
                || want
                    .iter()
                    .zip(p)
                    .any(|((_, s, _), t)| s.as_slice() != t.shape())
            {
                return Err(Error::config(
                    format!("layers[{i}]"),
                    "parameter shapes do not match the layer spec",
                ));
            }
        }
        Ok(Self {
            spec,
            shapes,
            params,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.spec.input_shape
    }

    pub fn params(&self) -> &[Vec<Tensor>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Vec<Tensor>] {
        &mut self.params
    }

    pub fn n_params(&self) -> u64 {
        self.spec.n_params()
    }

    fn check_batch(&self, batch: &Tensor) -> Result<()> {
        let s = batch.shape();
        if s.len() != self.spec.input_shape.len() + 1 || s[1..] != self.spec.input_shape[..] {
            let mut expected = vec![s.first().copied().unwrap_or(0)];
            expected.extend_from_slice(&self.spec.input_shape);
            return Err(Error::shape("model input", &expected, s));
        }
        Ok(())
    }

    fn run(&self, batch: &Tensor, keep: bool) -> Vec<Tensor> {
        let mut acts = Vec::with_capacity(if keep { self.spec.layers.len() + 1 } else { 2 });
        acts.push(batch.clone());
        for (i, l) in self.spec.layers.iter().enumerate() {
            let y = layer::forward(
                l,
                &self.params[i],
                acts.last().unwrap(),
                &self.shapes[i + 1],
            );
            if !keep {
                acts.clear();
            }
            acts.push(y);
        }
        acts
    }

    /// Raw head inputs `[batch, n_outputs]` (logits for classifiers).
    pub fn logits(&self, batch: &Tensor) -> Result<Tensor> {
        self.check_batch(batch)?;
        let out = self.run(batch, false).pop().unwrap();
        let b = batch.shape()[0];
        out.reshape(vec![b, self.spec.head.n_outputs()])
    }

    /// Predictions `[batch, n_outputs]`; classifier heads emit probabilities
    /// clamped to `[1e-7, 1 - 1e-7]`.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        let mut out = self.logits(batch)?;
        if self.spec.head == Head::BinaryClassifier {
            out.data_mut()
                .iter_mut()
                .for_each(|v| *v = sigmoid(*v).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP));
        }
        Ok(out)
    }

    fn check_loss(&self, loss: Loss) -> Result<()> {
        if loss == Loss::WeightedBce && self.spec.head != Head::BinaryClassifier {
            return Err(Error::config(
                "loss",
                "weighted_bce requires a binary_classifier head",
            ));
        }
        Ok(())
    }

    fn check_targets(&self, batch: &Tensor, targets: &Tensor, weights: &[f64]) -> Result<()> {
        let b = batch.shape()[0];
        let want = [b, self.spec.head.n_outputs()];
        if targets.shape() != want {
            return Err(Error::shape("targets", &want, targets.shape()));
        }
        if weights.len() != b {
            return Err(Error::shape("weights", &[b], &[weights.len()]));
        }
        Ok(())
    }

    /// Weighted loss sum `Σ w·l` and weight sum `Σ w` over the batch, plus
    /// the gradient of the mean loss with respect to the logits.
    fn loss_terms(
        &self,
        logits: &[f64],
        targets: &[f64],
        weights: &[f64],
        loss: Loss,
    ) -> (f64, f64, Vec<f64>) {
        let n_out = self.spec.head.n_outputs();
        let classifier = self.spec.head == Head::BinaryClassifier;
        let w_sum: f64 = weights.iter().sum();
        let mut total = 0.0;
        let mut grad = vec![0.0; logits.len()];
        for (b, &w) in weights.iter().enumerate() {
            let z = &logits[b * n_out..(b + 1) * n_out];
            let y = &targets[b * n_out..(b + 1) * n_out];
            let g = &mut grad[b * n_out..(b + 1) * n_out];
            match loss {
                Loss::Mse => {
                    let mut l = 0.0;
                    for j in 0..n_out {
                        let p = if classifier { sigmoid(z[j]) } else { z[j] };
                        let d = p - y[j];
                        l += d * d;
                        let dp = 2.0 * d / n_out as f64;
                        g[j] = if classifier { dp * p * (1.0 - p) } else { dp };
                    }
                    total += w * l / n_out as f64;
                }
                Loss::WeightedBce => {
                    let p = sigmoid(z[0]);
                    let pc = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                    total += -w * (y[0] * pc.ln() + (1.0 - y[0]) * (1.0 - pc).ln());
                    // logit-space gradient, kept unclamped so saturated
                    // wrong predictions still move
                    g[0] = p - y[0];
                }
            }
            let scale = if w_sum > 0.0 { w / w_sum } else { 0.0 };
            g.iter_mut().for_each(|v| *v *= scale);
        }
        (total, w_sum, grad)
    }

    /// `(Σ w·l, Σ w)` without touching gradients.
    pub fn loss_sums(
        &self,
        batch: &Tensor,
        targets: &Tensor,
        loss: Loss,
        weights: &[f64],
    ) -> Result<(f64, f64)> {
        self.check_loss(loss)?;
        self.check_targets(batch, targets, weights)?;
        let logits = self.logits(batch)?;
        let (total, w_sum, _) = self.loss_terms(logits.data(), targets.data(), weights, loss);
        Ok((total, w_sum))
    }

    /// Weighted-mean loss without touching gradients.
    pub fn loss(
        &self,
        batch: &Tensor,
        targets: &Tensor,
        loss: Loss,
        weights: &[f64],
    ) -> Result<f64> {
        let (total, w_sum) = self.loss_sums(batch, targets, loss, weights)?;
        Ok(if w_sum > 0.0 { total / w_sum } else { 0.0 })
    }

    /// Computes the weighted-mean loss and overwrites every parameter's
    /// gradient buffer with its derivative.
    pub fn backward(
        &mut self,
        batch: &Tensor,
        targets: &Tensor,
        loss: Loss,
        weights: &[f64],
    ) -> Result<f64> {
        self.check_batch(batch)?;
        self.check_loss(loss)?;
        self.check_targets(batch, targets, weights)?;
        let acts = self.run(batch, true);
        let (total, w_sum, mut grad) =
            self.loss_terms(acts.last().unwrap().data(), targets.data(), weights, loss);
        for p in self.params.iter_mut().flatten() {
            p.grad_mut();
            p.zero_grad();
        }
        for i in (0..self.spec.layers.len()).rev() {
            grad = layer::backward(
                &self.spec.layers[i],
                &mut self.params[i],
                &acts[i],
                &acts[i + 1],
                &grad,
            );
        }
        Ok(if w_sum > 0.0 { total / w_sum } else { 0.0 })
    }
}
