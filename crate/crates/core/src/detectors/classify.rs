//! Window classification, on raw windows or on their angular-field images.

use serde::{Deserialize, Serialize};

use super::{DetectionResult, Pipeline};
use crate::data::{compute_sample_weights, TimeSeries, WindowSpec};
use crate::error::{Error, Result};
use crate::gaf::{gaf_stack, GafConfig};
use crate::nn::{Dataset, Head, Model, Tensor};

const CHUNK: usize = 128;

/// Anomaly probability per sample.
pub trait WindowClassifier {
    /// `batch` holds `n` samples back to back; returns `n` probabilities.
    fn probabilities(&self, batch: &[f64], n: usize) -> Result<Vec<f64>>;
}

impl WindowClassifier for Model {
    fn probabilities(&self, batch: &[f64], n: usize) -> Result<Vec<f64>> {
        if self.spec().head != Head::BinaryClassifier {
            return Err(Error::config(
                "model.head",
                "classifier needs a binary_classifier head",
            ));
        }
        let mut shape = vec![n];
        shape.extend_from_slice(self.input_shape());
        let expected: usize = shape.iter().product();
        if expected != batch.len() {
            return Err(Error::shape("classifier input", &shape, &[batch.len()]));
        }
        Ok(self
            .forward(&Tensor::new(shape, batch.to_vec())?)?
            .into_data())
    }
}

fn default_prob() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    #[serde(default)]
    pub window: WindowSpec,
    #[serde(default = "default_prob")]
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageConfig {
    #[serde(default)]
    pub window: WindowSpec,
    #[serde(default)]
    pub gaf: GafConfig,
    #[serde(default = "default_prob")]
    pub threshold: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            window: WindowSpec::default(),
            threshold: default_prob(),
        }
    }
}

impl Default for ImageConfig {
    fn default() -> Self {
        Self {
            window: WindowSpec::default(),
            gaf: GafConfig::default(),
            threshold: default_prob(),
        }
    }
}

fn check_threshold(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::config(
            "threshold",
            "probability threshold must be in [0, 1]",
        ));
    }
    Ok(())
}

/// Runs `encode` over every window start in chunks and classifies the
/// encoded samples. Returns one probability per window.
fn window_probabilities(
    series: &TimeSeries,
    spec: &WindowSpec,
    classifier: &dyn WindowClassifier,
    mut encode: impl FnMut(&[f64], usize, &mut Vec<f64>) -> Result<()>,
) -> Result<Vec<f64>> {
    spec.validate()?;
    let n_windows = spec.count(series.len());
    if n_windows == 0 {
        return Err(Error::config(
            "window.length",
            format!(
                "series has {} points, shorter than one window of {}",
                series.len(),
                spec.length
            ),
        ));
    }
    let c = series.n_channels();
    let mut probs = Vec::with_capacity(n_windows);
    let mut batch = Vec::new();
    for first in (0..n_windows).step_by(CHUNK) {
        let n = CHUNK.min(n_windows - first);
        batch.clear();
        for i in first..first + n {
            let start = i * spec.stride;
            encode(
                &series.values()[start * c..(start + spec.length) * c],
                i,
                &mut batch,
            )?;
        }
        let p = classifier.probabilities(&batch, n)?;
        if p.len() != n {
            return Err(Error::shape("classifier output", &[n], &[p.len()]));
        }
        probs.extend(p);
    }
    Ok(probs)
}

/// Spreads window probabilities onto points: each point scores the maximum
/// over covering windows and is flagged when any covering window reaches
/// `threshold`.
pub fn window_flags(
    n_points: usize,
    spec: &WindowSpec,
    probs: &[f64],
    threshold: f64,
) -> (Vec<f64>, Vec<u8>) {
    let mut scores = vec![0.0f64; n_points];
    let mut cover = vec![0i64; n_points + 1];
    for (i, &p) in probs.iter().enumerate() {
        let start = i * spec.stride;
        let end = start + spec.length;
        for s in &mut scores[start..end] {
            *s = s.max(p);
        }
        if p >= threshold {
            cover[start] += 1;
            cover[end] -= 1;
        }
    }
    let mut depth = 0;
    let flags = cover[..n_points]
        .iter()
        .map(|&d| {
            depth += d;
            u8::from(depth > 0)
        })
        .collect();
    (scores, flags)
}

pub fn detect_classify(
    series: &TimeSeries,
    classifier: &dyn WindowClassifier,
    config: &ClassifyConfig,
) -> Result<DetectionResult> {
    check_threshold(config.threshold)?;
    let probs = window_probabilities(series, &config.window, classifier, |w, _, out| {
        out.extend_from_slice(w);
        Ok(())
    })?;
    let (scores, flags) = window_flags(series.len(), &config.window, &probs, config.threshold);
    DetectionResult::new(
        Pipeline::Classify,
        serde_json::to_value(config)?,
        series,
        scores,
        flags,
    )
}

pub fn detect_image(
    series: &TimeSeries,
    classifier: &dyn WindowClassifier,
    config: &ImageConfig,
) -> Result<DetectionResult> {
    check_threshold(config.threshold)?;
    config.gaf.validate()?;
    let c = series.n_channels();
    let probs = window_probabilities(series, &config.window, classifier, |w, id, out| {
        out.extend(gaf_stack(w, c, &config.gaf, id)?.to_channels_last());
        Ok(())
    })?;
    let (scores, flags) = window_flags(series.len(), &config.window, &probs, config.threshold);
    DetectionResult::new(
        Pipeline::Image,
        serde_json::to_value(config)?,
        series,
        scores,
        flags,
    )
}

/// Labeled windows `[n, length, C]` with class-balanced weights.
pub fn window_dataset(series: &TimeSeries, spec: &WindowSpec) -> Result<Dataset> {
    let w = crate::data::make_windows(series, spec)?;
    let n = w.len();
    let targets: Vec<f64> = w.labels.iter().map(|&l| f64::from(l)).collect();
    let weights = compute_sample_weights(&w.labels);
    Dataset::new(
        Tensor::new(vec![n, w.length, w.n_channels], w.data)?,
        Tensor::new(vec![n, 1], targets)?,
        weights,
    )
}

/// Labeled image stacks `[n, S, S, C]` with class-balanced weights.
pub fn image_dataset(series: &TimeSeries, spec: &WindowSpec, gaf: &GafConfig) -> Result<Dataset> {
    gaf.validate()?;
    let w = crate::data::make_windows(series, spec)?;
    let n = w.len();
    let s = gaf.resolution;
    let mut data = Vec::with_capacity(n * s * s * w.n_channels);
    for i in 0..n {
        data.extend(gaf_stack(w.window(i), w.n_channels, gaf, i)?.to_channels_last());
    }
    let targets: Vec<f64> = w.labels.iter().map(|&l| f64::from(l)).collect();
    let weights = compute_sample_weights(&w.labels);
    Dataset::new(
        Tensor::new(vec![n, s, s, w.n_channels], data)?,
        Tensor::new(vec![n, 1], targets)?,
        weights,
    )
}
