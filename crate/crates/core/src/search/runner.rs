//! Trial execution, the JSON-lines trial store and the search loop.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{family_loss, pareto_front, ArchitectureConfig, ParetoFront, Sampler, SearchSpace};
use crate::costmodel::profile;
use crate::error::{Error, Result};
use crate::nn::{train, Dataset, Model, TrainConfig};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Completed,
    Pruned,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub id: usize,
    pub config: ArchitectureConfig,
    pub status: TrialStatus,
    /// Best validation loss of the run; completed trials only.
    pub val_loss: Option<f64>,
    pub val_trace: Vec<f64>,
    pub macs: u64,
    pub params: u64,
    /// Reason for a pruned or failed trial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

/// Training data shared by all trials of a search.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub train: Dataset,
    pub validation: Dataset,
    /// Per-sample input shape of both datasets.
    pub input_shape: Vec<usize>,
    pub n_outputs: usize,
}

/// `true` when the configuration must be discarded for exceeding the
/// baseline parameter count.
pub fn prune_by_size(params: u64, baseline_params: u64) -> bool {
    params > baseline_params
}

/// Builds, sizes and trains one configuration. Errors are recorded in the
/// returned trial rather than propagated.
pub fn run_trial(
    id: usize,
    config: &ArchitectureConfig,
    data: &TrialData,
    train_config: &TrainConfig,
    baseline_params: u64,
    seed: u64,
) -> Trial {
    let mut trial = Trial {
        id,
        config: config.clone(),
        status: TrialStatus::Failed,
        val_loss: None,
        val_trace: Vec::new(),
        macs: 0,
        params: 0,
        message: None,
    };
    let spec = match config.to_model_spec(&data.input_shape, data.n_outputs) {
        Ok(s) => s,
        Err(e) => {
            trial.message = Some(e.to_string());
            return trial;
        }
    };
    match profile(&spec) {
        Ok(cost) => {
            trial.macs = cost.total_macs;
            trial.params = cost.total_params;
        }
        Err(e) => {
            trial.message = Some(e.to_string());
            return trial;
        }
    }
    if prune_by_size(trial.params, baseline_params) {
        trial.status = TrialStatus::Pruned;
        trial.message = Some(format!(
            "{} params exceed baseline {baseline_params}",
            trial.params
        ));
        return trial;
    }
    let mut cfg = train_config.clone();
    cfg.loss = family_loss(config.family);
    cfg.seed = rng::derive_seed(seed, "train");
    let outcome = Model::new(spec, rng::derive_seed(seed, "init"))
        .and_then(|mut model| train(&mut model, &data.train, &data.validation, &cfg));
    match outcome {
        Ok(report) if report.best_val_loss.is_finite() => {
            trial.status = TrialStatus::Completed;
            trial.val_loss = Some(report.best_val_loss);
            trial.val_trace = report.val_trace;
        }
        Ok(report) => {
            trial.val_trace = report.val_trace;
            trial.message = Some("non-finite validation loss".into());
        }
        Err(e) => trial.message = Some(e.to_string()),
    }
    trial
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub space: SearchSpace,
    pub n_trials: usize,
    /// Parameter count above which configurations are pruned untrained.
    pub baseline_params: u64,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        self.train.validate()?;
        if self.n_trials == 0 {
            return Err(Error::config("n_trials", "must be >= 1"));
        }
        if self.baseline_params == 0 {
            return Err(Error::config("baseline_params", "must be >= 1"));
        }
        if self.workers == 0 {
            return Err(Error::config("workers", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    /// All trials ordered by id.
    pub trials: Vec<Trial>,
    /// `None` when no trial completed.
    pub front: Option<ParetoFront>,
}

/// Samples and trains `n_trials` configurations, `workers` at a time.
///
/// Each batch is sampled against the history of earlier batches and every
/// trial trains from its own seed, so the outcome does not depend on the
/// worker count or on completion order.
pub fn run_search(
    config: &SearchConfig,
    data: &TrialData,
    sampler: &mut dyn Sampler,
    seed: u64,
) -> Result<SearchOutcome> {
    config.validate()?;
    let trial_root = rng::derive_seed(seed, "trials");
    let mut trials: Vec<Trial> = Vec::with_capacity(config.n_trials);
    while trials.len() < config.n_trials {
        let first = trials.len();
        let batch = config.workers.min(config.n_trials - first);
        let configs: Vec<ArchitectureConfig> = (0..batch)
            .map(|_| sampler.sample(&config.space, &trials))
            .collect();
        let run = |k: usize| {
            let id = first + k;
            run_trial(
                id,
                &configs[k],
                data,
                &config.train,
                config.baseline_params,
                rng::derive_indexed(trial_root, id as u64),
            )
        };
        let mut done: Vec<Trial> = if batch == 1 {
            vec![run(0)]
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = (0..batch).map(|k| s.spawn(move || run(k))).collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("trial thread panicked"))
                    .collect()
            })
        };
        done.sort_by_key(|t| t.id);
        trials.extend(done);
    }
    let front = pareto_front(&trials).ok();
    Ok(SearchOutcome { trials, front })
}

/// Writes one JSON object per line, ordered as given.
pub fn save_trials(trials: &[Trial], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for t in trials {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_trials(path: impl AsRef<Path>) -> Result<Vec<Trial>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut trials = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t = serde_json::from_str(&line).map_err(|e| Error::MalformedRow {
            line: i as u64 + 1,
            message: e.to_string(),
        })?;
        trials.push(t);
    }
    Ok(trials)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::Pipeline;
    use crate::nn::{ActivationFn, Tensor};
    use crate::search::{ConvBlock, IntRange, RandomSampler};

    fn data() -> TrialData {
        let n = 64;
        let mut g = rng::seeded(1);
        let x: Vec<f64> = (0..n * 8).map(|_| rng::uniform(&mut g)).collect();
        let y: Vec<f64> = (0..n).map(|i| x[i * 8 + 7]).collect();
        let ds = Dataset::unweighted(
            Tensor::new(vec![n, 8, 1], x).unwrap(),
            Tensor::new(vec![n, 1], y).unwrap(),
        )
        .unwrap();
        TrialData {
            train: ds.clone(),
            validation: ds,
            input_shape: vec![8, 1],
            n_outputs: 1,
        }
    }

    fn small_train() -> TrainConfig {
        TrainConfig {
            steps: 64,
            eval_every: 8,
            batch_size: 8,
            ..Default::default()
        }
    }

    fn config(filters: usize) -> ArchitectureConfig {
        ArchitectureConfig {
            family: Pipeline::Forecast,
            blocks: vec![ConvBlock {
                filters,
                kernel_size: 3,
            }],
            activation: ActivationFn::Tanh,
        }
    }

    #[test]
    fn size_rule() {
        assert!(!prune_by_size(19_000, 310_000));
        assert!(!prune_by_size(310_000, 310_000));
        assert!(prune_by_size(310_001, 310_000));
    }

    #[test]
    fn trial_records_trace() {
        let t = run_trial(0, &config(4), &data(), &small_train(), 1_000_000, 3);
        assert_eq!(t.status, TrialStatus::Completed, "{:?}", t.message);
        assert_eq!(t.val_trace.len(), 8);
        let min = t.val_trace.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(t.val_loss, Some(min));
        assert!(t.macs > 0 && t.params > 0);
        assert_eq!(
            t,
            run_trial(0, &config(4), &data(), &small_train(), 1_000_000, 3)
        );
    }

    #[test]
    fn pruned_trial_untrained() {
        let t = run_trial(2, &config(16), &data(), &small_train(), 10, 3);
        assert_eq!(t.status, TrialStatus::Pruned);
        assert!(t.val_loss.is_none() && t.val_trace.is_empty());
        assert!(t.params > 10);
    }

    #[test]
    fn bad_architecture_fails_softly() {
        let mut d = data();
        d.input_shape = vec![8];
        let t = run_trial(0, &config(4), &d, &small_train(), 1_000_000, 3);
        assert_eq!(t.status, TrialStatus::Failed);
        assert!(t.message.is_some());
    }

    fn search(workers: usize) -> SearchOutcome {
        let cfg = SearchConfig {
            space: SearchSpace {
                family: Pipeline::Forecast,
                layers: IntRange::new(1, 2),
                filters: IntRange::new(2, 6),
                kernel_size: IntRange::new(2, 4),
                activations: vec![ActivationFn::Relu, ActivationFn::Tanh],
            },
            n_trials: 5,
            baseline_params: 400,
            train: small_train(),
            workers,
        };
        run_search(&cfg, &data(), &mut RandomSampler::new(4), 11).unwrap()
    }

    #[test]
    fn worker_count_does_not_change_outcome() {
        let a = search(1);
        assert_eq!(a.trials.len(), 5);
        assert!(a.trials.iter().enumerate().all(|(i, t)| t.id == i));
        assert_eq!(a, search(3));
    }

    #[test]
    fn store_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trials.jsonl");
        let out = search(2);
        save_trials(&out.trials, &path).unwrap();
        assert_eq!(load_trials(&path).unwrap(), out.trials);
        std::fs::write(&path, "{\"id\":1}\n").unwrap();
        assert!(matches!(
            load_trials(&path),
            Err(Error::MalformedRow { line: 1, .. })
        ));
    }
}
