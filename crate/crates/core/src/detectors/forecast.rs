//! One-step-ahead forecasting followed by dynamic thresholding.

use serde::{Deserialize, Serialize};

use super::threshold::{dynamic_threshold, prune_anomalies, smooth_errors, ThresholdParams};
use super::{DetectionResult, Pipeline};
use crate::data::TimeSeries;
use crate::error::{Error, Result};
use crate::nn::{ActivationFn, Dataset, Head, LayerSpec, Model, ModelSpec, Tensor};

const CHUNK: usize = 512;

/// Predicts the next value of the target channels from a window of history.
pub trait Forecaster {
    /// `windows` is `[n × window × n_channels]`; returns `[n × targets.len()]`.
    fn predict(
        &self,
        windows: &[f64],
        n: usize,
        window: usize,
        n_channels: usize,
        targets: &[usize],
    ) -> Result<Vec<f64>>;
}

/// Repeats the last observed value.
#[derive(Debug, Clone, Copy, Default)]
pub struct Persistence;

impl Forecaster for Persistence {
    fn predict(
        &self,
        windows: &[f64],
        n: usize,
        window: usize,
        n_channels: usize,
        targets: &[usize],
    ) -> Result<Vec<f64>> {
        let stride = window * n_channels;
        let mut out = Vec::with_capacity(n * targets.len());
        for i in 0..n {
            let last = &windows[i * stride + (window - 1) * n_channels..(i + 1) * stride];
            out.extend(targets.iter().map(|&c| last[c]));
        }
        Ok(out)
    }
}

impl Forecaster for Model {
    fn predict(
        &self,
        windows: &[f64],
        n: usize,
        window: usize,
        n_channels: usize,
        targets: &[usize],
    ) -> Result<Vec<f64>> {
        let expected = window * n_channels;
        let sample: usize = self.input_shape().iter().product();
        if sample != expected {
            return Err(Error::shape(
                "forecaster input",
                self.input_shape(),
                &[window, n_channels],
            ));
        }
        if !matches!(self.spec().head, Head::Regression { n_outputs } if n_outputs == targets.len())
        {
            return Err(Error::config(
                "model.head",
                format!(
                    "forecaster needs a regression head with {} outputs",
                    targets.len()
                ),
            ));
        }
        let mut shape = vec![n];
        shape.extend_from_slice(self.input_shape());
        let out = self.forward(&Tensor::new(shape, windows.to_vec())?)?;
        Ok(out.into_data())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastConfig {
    /// History length fed to the forecaster.
    pub window: usize,
    /// Channel indices to forecast; all channels when absent.
    #[serde(default)]
    pub targets: Option<Vec<usize>>,
    #[serde(default)]
    pub threshold: ThresholdParams,
}

impl ForecastConfig {
    pub fn new(window: usize) -> Self {
        Self {
            window,
            targets: None,
            threshold: ThresholdParams::default(),
        }
    }

    pub fn target_channels(&self, n_channels: usize) -> Result<Vec<usize>> {
        let targets = self
            .targets
            .clone()
            .unwrap_or_else(|| (0..n_channels).collect());
        if targets.is_empty() {
            return Err(Error::config("forecast.targets", "must not be empty"));
        }
        if let Some(&bad) = targets.iter().find(|&&c| c >= n_channels) {
            return Err(Error::config(
                "forecast.targets",
                format!("channel {bad} out of range for {n_channels} channels"),
            ));
        }
        Ok(targets)
    }
}

/// Small forecaster used by the benchmark suite: one depthwise-separable
/// block (8 filters, kernel 3, same padding), tanh, then a dense map from the
/// flattened features to every channel.
pub fn reference_forecaster(window: usize, n_channels: usize) -> ModelSpec {
    const FILTERS: usize = 8;
    ModelSpec {
        input_shape: vec![window, n_channels],
        layers: vec![
            LayerSpec::DepthwiseSeparableConv1d {
                in_channels: n_channels,
                out_channels: FILTERS,
                kernel_size: 3,
                stride: 1,
                padding: 1,
            },
            LayerSpec::Activation {
                function: ActivationFn::Tanh,
            },
            LayerSpec::Flatten,
            LayerSpec::Dense {
                inputs: window * FILTERS,
                outputs: n_channels,
            },
        ],
        head: Head::Regression {
            n_outputs: n_channels,
        },
    }
}

fn check_length(series: &TimeSeries, window: usize) -> Result<()> {
    if window == 0 {
        return Err(Error::config("forecast.window", "must be at least 1"));
    }
    if series.len() <= window {
        return Err(Error::config(
            "forecast.window",
            format!(
                "series has {} points, needs more than {window}",
                series.len()
            ),
        ));
    }
    Ok(())
}

/// Mean absolute one-step error over the target channels for every
/// `t ∈ [window, n)`; the result has `n - window` entries.
pub fn forecast_errors(
    forecaster: &dyn Forecaster,
    series: &TimeSeries,
    window: usize,
    targets: &[usize],
) -> Result<Vec<f64>> {
    check_length(series, window)?;
    let c = series.n_channels();
    let values = series.values();
    let mut errors = Vec::with_capacity(series.len() - window);
    let mut t = window;
    while t < series.len() {
        let n = CHUNK.min(series.len() - t);
        // windows for t..t+n are consecutive, overlapping slices of values
        let mut batch = Vec::with_capacity(n * window * c);
        for k in 0..n {
            batch.extend_from_slice(&values[(t + k - window) * c..(t + k) * c]);
        }
        let pred = forecaster.predict(&batch, n, window, c, targets)?;
        if pred.len() != n * targets.len() {
            return Err(Error::shape(
                "forecast output",
                &[n, targets.len()],
                &[pred.len()],
            ));
        }
        for k in 0..n {
            let row = series.row(t + k);
            let p = &pred[k * targets.len()..(k + 1) * targets.len()];
            let e = targets
                .iter()
                .zip(p)
                .map(|(&ch, &y)| (y - row[ch]).abs())
                .sum::<f64>()
                / targets.len() as f64;
            errors.push(e);
        }
        t += n;
    }
    Ok(errors)
}

/// Training pairs `(window, next target values)`. With `nominal_only`, pairs
/// whose window or target point carries an anomaly label are skipped.
pub fn forecast_dataset(
    series: &TimeSeries,
    window: usize,
    targets: &[usize],
    nominal_only: bool,
) -> Result<Dataset> {
    check_length(series, window)?;
    let c = series.n_channels();
    let labels = series.labels();
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut n = 0;
    for t in window..series.len() {
        if nominal_only && labels[t - window..=t].contains(&1) {
            continue;
        }
        inputs.extend_from_slice(&series.values()[(t - window) * c..t * c]);
        let row = series.row(t);
        outputs.extend(targets.iter().map(|&ch| row[ch]));
        n += 1;
    }
    if n == 0 {
        return Err(Error::Empty("no nominal forecasting windows".into()));
    }
    Dataset::unweighted(
        Tensor::new(vec![n, window, c], inputs)?,
        Tensor::new(vec![n, targets.len()], outputs)?,
    )
}

pub fn detect_forecast(
    series: &TimeSeries,
    forecaster: &dyn Forecaster,
    config: &ForecastConfig,
) -> Result<DetectionResult> {
    config.threshold.validate()?;
    let targets = config.target_channels(series.n_channels())?;
    let w = config.window;
    let errors = forecast_errors(forecaster, series, w, &targets)?;
    let smoothed = smooth_errors(&errors, config.threshold.alpha)?;
    let outcome = dynamic_threshold(&smoothed, &config.threshold)?;
    let kept = prune_anomalies(&smoothed, &outcome.flags, config.threshold.pruning)?;

    let mut scores = vec![0.0; w];
    scores.extend_from_slice(&smoothed);
    let mut flags = vec![0u8; series.len()];
    for (a, b) in kept {
        flags[w + a..=w + b].iter_mut().for_each(|f| *f = 1);
    }
    DetectionResult::new(
        Pipeline::Forecast,
        serde_json::to_value(config)?,
        series,
        scores,
        flags,
    )
}
