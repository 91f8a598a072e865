//! Architecture search over validation loss and MACs.

mod pareto;
mod runner;

pub use pareto::{
    export_front, knee_point, pareto_front, pareto_indices, write_front, ParetoFront, Role,
};
pub use runner::{
    load_trials, prune_by_size, run_search, run_trial, save_trials, SearchConfig, SearchOutcome,
    Trial, TrialData, TrialStatus,
};

use serde::{Deserialize, Serialize};

use crate::detectors::Pipeline;
use crate::error::{Error, Result};
use crate::nn::{ActivationFn, Head, LayerSpec, Loss, ModelSpec};
use crate::rng::{self, Generator};

/// Inclusive integer range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntRange {
    pub min: usize,
    pub max: usize,
}

impl IntRange {
    pub fn new(min: usize, max: usize) -> Self {
        Self { min, max }
    }

    fn validate(&self, field: &str) -> Result<()> {
        if self.min == 0 || self.min > self.max {
            return Err(Error::config(
                field,
                format!("need 1 <= min <= max, got {}..={}", self.min, self.max),
            ));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut Generator) -> usize {
        rng::uniform_int(rng, self.min, self.max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    pub family: Pipeline,
    pub layers: IntRange,
    /// Output channels of each convolution, drawn per layer.
    pub filters: IntRange,
    /// Kernel size of each convolution, drawn per layer.
    pub kernel_size: IntRange,
    pub activations: Vec<ActivationFn>,
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        self.layers.validate("space.layers")?;
        self.filters.validate("space.filters")?;
        self.kernel_size.validate("space.kernel_size")?;
        if self.activations.is_empty() {
            return Err(Error::config("space.activations", "must not be empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvBlock {
    pub filters: usize,
    pub kernel_size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureConfig {
    pub family: Pipeline,
    pub blocks: Vec<ConvBlock>,
    pub activation: ActivationFn,
}

impl ArchitectureConfig {
    /// Builds the network for per-sample `input_shape`.
    ///
    /// * forecast: separable 1-D blocks, flatten, dense regression head
    /// * classify: separable 1-D blocks, global pooling, dense logit
    /// * image: stride-2 2-D blocks, global pooling, dense logit
    pub fn to_model_spec(&self, input_shape: &[usize], n_outputs: usize) -> Result<ModelSpec> {
        if self.blocks.is_empty() {
            return Err(Error::config("config.blocks", "need at least one block"));
        }
        let rank = if self.family == Pipeline::Image { 3 } else { 2 };
        if input_shape.len() != rank {
            return Err(Error::shape(
                "architecture input",
                &vec![0; rank],
                input_shape,
            ));
        }
        let mut channels = input_shape[rank - 1];
        let mut layers = Vec::new();
        for b in &self.blocks {
            let padding = b.kernel_size / 2;
            layers.push(match self.family {
                Pipeline::Image => LayerSpec::Conv2d {
                    in_channels: channels,
                    out_channels: b.filters,
                    kernel_size: b.kernel_size,
                    stride: 2,
                    padding,
                },
                _ => LayerSpec::DepthwiseSeparableConv1d {
                    in_channels: channels,
                    out_channels: b.filters,
                    kernel_size: b.kernel_size,
                    stride: 1,
                    padding,
                },
            });
            layers.push(LayerSpec::Activation {
                function: self.activation,
            });
            channels = b.filters;
        }
        let head = match self.family {
            Pipeline::Forecast => Head::Regression { n_outputs },
            _ => Head::BinaryClassifier,
        };
        let mut spec = ModelSpec {
            input_shape: input_shape.to_vec(),
            layers,
            head,
        };
        let features = if self.family == Pipeline::Forecast {
            spec.layers.push(LayerSpec::Flatten);
            output_shape(&spec)?.iter().product()
        } else {
            spec.layers.push(LayerSpec::GlobalAvgPool);
            channels
        };
        spec.layers.push(LayerSpec::Dense {
            inputs: features,
            outputs: head.n_outputs(),
        });
        spec.shapes()?;
        Ok(spec)
    }
}

fn output_shape(spec: &ModelSpec) -> Result<Vec<usize>> {
    let mut shape = spec.input_shape.clone();
    for l in &spec.layers {
        shape = l.output_shape(&shape)?;
    }
    Ok(shape)
}

/// Training loss matching the family's head.
pub fn family_loss(family: Pipeline) -> Loss {
    match family {
        Pipeline::Forecast => Loss::Mse,
        _ => Loss::WeightedBce,
    }
}

/// Proposes the next configuration given the trials seen so far.
pub trait Sampler {
    fn sample(&mut self, space: &SearchSpace, history: &[Trial]) -> ArchitectureConfig;
}

/// Independent uniform draws from every range.
#[derive(Debug, Clone)]
pub struct RandomSampler {
    rng: Generator,
}

impl RandomSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: rng::seeded(seed),
        }
    }
}

impl Sampler for RandomSampler {
    fn sample(&mut self, space: &SearchSpace, _history: &[Trial]) -> ArchitectureConfig {
        let n = space.layers.sample(&mut self.rng);
        let blocks = (0..n)
            .map(|_| ConvBlock {
                filters: space.filters.sample(&mut self.rng),
                kernel_size: space.kernel_size.sample(&mut self.rng),
            })
            .collect();
        let a = rng::uniform_int(&mut self.rng, 0, space.activations.len() - 1);
        ArchitectureConfig {
            family: space.family,
            blocks,
            activation: space.activations[a],
        }
    }
}
