//! Telemetry data model: series, events, windows, normalization and splits.

mod csvio;
mod suite;
mod synth;

pub use csvio::{load_csv, read_csv, write_csv, write_csv_to, CsvSchema};
pub use suite::{
    suite_case, SuiteCase, SUITE_ANOMALIES, SUITE_CHANNELS, SUITE_NOISE, SUITE_NOMINAL_POINTS,
    SUITE_TEST_POINTS,
};
pub use synth::{synthesize, AnomalyKind, ChannelSignal, InjectedAnomaly, SyntheticSpec};

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multichannel telemetry with per-point binary anomaly labels.
///
/// Values are stored row-major (`n_points × n_channels`) and are always
/// finite.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    channel_names: Vec<String>,
    timestamps: Vec<f64>,
    values: Vec<f64>,
    labels: Vec<u8>,
}

impl TimeSeries {
    pub fn new(
        channel_names: Vec<String>,
        timestamps: Vec<f64>,
        values: Vec<f64>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        let n = timestamps.len();
        let c = channel_names.len();
        if c == 0 {
            return Err(Error::config(
                "channel_names",
                "at least one channel required",
            ));
        }
        if values.len() != n * c {
            return Err(Error::shape("TimeSeries values", &[n, c], &[values.len()]));
        }
        if labels.len() != n {
            return Err(Error::shape("TimeSeries labels", &[n], &[labels.len()]));
        }
        if let Some(i) = timestamps.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::config(
                "timestamps",
                format!("not strictly increasing at index {}", i + 1),
            ));
        }
        if timestamps.iter().any(|t| !t.is_finite()) {
            return Err(Error::config("timestamps", "non-finite timestamp"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::config(
                "values",
                format!("non-finite value at point {} channel {}", i / c, i % c),
            ));
        }
        if let Some(i) = labels.iter().position(|&l| l > 1) {
            return Err(Error::config(
                "labels",
                format!("label at point {i} is not 0/1"),
            ));
        }
        Ok(Self {
            channel_names,
            timestamps,
            values,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn n_channels(&self) -> usize {
        self.channel_names.len()
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Row-major values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, point: usize, channel: usize) -> f64 {
        self.values[point * self.n_channels() + channel]
    }

    pub fn row(&self, point: usize) -> &[f64] {
        let c = self.n_channels();
        &self.values[point * c..(point + 1) * c]
    }

    pub fn column(&self, channel: usize) -> Vec<f64> {
        self.values
            .iter()
            .skip(channel)
            .step_by(self.n_channels())
            .copied()
            .collect()
    }

    /// Copy of the points in `range`.
    pub fn slice(&self, range: Range<usize>) -> TimeSeries {
        let c = self.n_channels();
        TimeSeries {
            channel_names: self.channel_names.clone(),
            timestamps: self.timestamps[range.clone()].to_vec(),
            values: self.values[range.start * c..range.end * c].to_vec(),
            labels: self.labels[range].to_vec(),
        }
    }

    /// Same timestamps and values with replaced labels.
    pub fn with_labels(&self, labels: Vec<u8>) -> Result<TimeSeries> {
        TimeSeries::new(
            self.channel_names.clone(),
            self.timestamps.clone(),
            self.values.clone(),
            labels,
        )
    }

    fn with_values(&self, values: Vec<f64>) -> TimeSeries {
        TimeSeries {
            channel_names: self.channel_names.clone(),
            timestamps: self.timestamps.clone(),
            values,
            labels: self.labels.clone(),
        }
    }
}

/// Inclusive time interval of a contiguous anomaly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyEvent {
    pub start: f64,
    pub end: f64,
}

impl AnomalyEvent {
    pub fn new(start: f64, end: f64) -> Self {
        debug_assert!(start <= end);
        Self { start, end }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelRule {
    /// A window is anomalous when any covered point is.
    #[default]
    AnyPointAnomalous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    #[serde(default = "WindowSpec::default_length")]
    pub length: usize,
    #[serde(default = "WindowSpec::default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub label_rule: LabelRule,
}

impl WindowSpec {
    fn default_length() -> usize {
        224
    }

    fn default_stride() -> usize {
        1
    }

    pub fn new(length: usize, stride: usize) -> Result<Self> {
        let spec = Self {
            length,
            stride,
            label_rule: LabelRule::AnyPointAnomalous,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.length < 2 {
            return Err(Error::config("window.length", "must be at least 2"));
        }
        if self.stride < 1 {
            return Err(Error::config("window.stride", "must be at least 1"));
        }
        Ok(())
    }

    /// Number of windows over `n_points` points, zero when too short.
    pub fn count(&self, n_points: usize) -> usize {
        if n_points < self.length {
            0
        } else {
            (n_points - self.length) / self.stride + 1
        }
    }
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            length: Self::default_length(),
            stride: Self::default_stride(),
            label_rule: LabelRule::AnyPointAnomalous,
        }
    }
}

/// A batch of windows cut from one series.
#[derive(Debug, Clone, PartialEq)]
pub struct Windows {
    /// `[n_windows × length × n_channels]`, row-major.
    pub data: Vec<f64>,
    pub labels: Vec<u8>,
    /// First point index of each window.
    pub starts: Vec<usize>,
    pub length: usize,
    pub n_channels: usize,
}

impl Windows {
    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn window(&self, i: usize) -> &[f64] {
        let n = self.length * self.n_channels;
        &self.data[i * n..(i + 1) * n]
    }
}

pub fn make_windows(series: &TimeSeries, spec: &WindowSpec) -> Result<Windows> {
    spec.validate()?;
    let n = spec.count(series.len());
    if n == 0 {
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
    let mut data = Vec::with_capacity(n * spec.length * c);
    let mut labels = Vec::with_capacity(n);
    let mut starts = Vec::with_capacity(n);
    for i in 0..n {
        let start = i * spec.stride;
        let end = start + spec.length;
        data.extend_from_slice(&series.values[start * c..end * c]);
        let label = match spec.label_rule {
            LabelRule::AnyPointAnomalous => series.labels[start..end].contains(&1),
        };
        labels.push(u8::from(label));
        starts.push(start);
    }
    Ok(Windows {
        data,
        labels,
        starts,
        length: spec.length,
        n_channels: c,
    })
}

/// Class-balanced inverse-frequency weights with unit mean.
///
/// Each class receives half of the total weight. Single-class input gets
/// uniform weights.
pub fn compute_sample_weights(labels: &[u8]) -> Vec<f64> {
    let n = labels.len();
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = n - positives;
    if positives == 0 || negatives == 0 {
        return vec![1.0; n];
    }
    let pos_w = n as f64 / (2.0 * positives as f64);
    let neg_w = n as f64 / (2.0 * negatives as f64);
    labels
        .iter()
        .map(|&l| if l == 1 { pos_w } else { neg_w })
        .collect()
}

/// Per-channel min/max fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

pub fn fit_normalizer(train: &TimeSeries) -> Result<NormParams> {
    if train.is_empty() {
        return Err(Error::Empty("normalizer training split".into()));
    }
    let c = train.n_channels();
    let mut min = vec![f64::INFINITY; c];
    let mut max = vec![f64::NEG_INFINITY; c];
    for row in train.values.chunks_exact(c) {
        for (j, &v) in row.iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    Ok(NormParams { min, max })
}

/// Maps each channel to [-1, 1] with `x' = 2(x - min)/(max - min) - 1`,
/// clipping values outside the fitted range. Constant channels map to 0.
pub fn apply_normalizer(series: &TimeSeries, params: &NormParams) -> Result<TimeSeries> {
    let c = series.n_channels();
    if params.min.len() != c || params.max.len() != c {
        return Err(Error::shape("NormParams", &[c], &[params.min.len()]));
    }
    let values = series
        .values
        .chunks_exact(c)
        .flat_map(|row| {
            row.iter().enumerate().map(|(j, &v)| {
                let (lo, hi) = (params.min[j], params.max[j]);
                if hi > lo {
                    (2.0 * (v - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0)
                } else {
                    0.0
                }
            })
        })
        .collect();
    Ok(series.with_values(values))
}

/// Contiguous temporal train/validation/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: TimeSeries,
    pub validation: TimeSeries,
    pub test: TimeSeries,
    pub ranges: [Range<usize>; 3],
}

/// Index ranges for a three-way split: each boundary is floored and the
/// last split absorbs the remainder.
pub fn split_ranges(n_points: usize, fractions: [f64; 3]) -> Result<[Range<usize>; 3]> {
    if fractions.iter().any(|f| !(*f > 0.0) || !f.is_finite()) {
        return Err(Error::config(
            "fractions",
            "every fraction must be positive",
        ));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::config(
            "fractions",
            format!("must sum to 1, got {sum}"),
        ));
    }
    let n = n_points as f64;
    // the epsilon keeps 0.7 + 0.15 style sums from flooring one short
    let b1 = ((n * fractions[0]) + 1e-9).floor() as usize;
    let b2 = ((n * (fractions[0] + fractions[1])) + 1e-9).floor() as usize;
    let b1 = b1.min(n_points);
    let b2 = b2.clamp(b1, n_points);
    Ok([0..b1, b1..b2, b2..n_points])
}

/// Splits `series` in temporal order. Every split must hold at least
/// `min_points` points (typically one window).
pub fn split(series: &TimeSeries, fractions: [f64; 3], min_points: usize) -> Result<Splits> {
    let ranges = split_ranges(series.len(), fractions)?;
    let names = ["train", "validation", "test"];
    for (r, name) in ranges.iter().zip(names) {
        if r.len() < min_points.max(1) {
            return Err(Error::config(
                "fractions",
                format!(
                    "{name} split has {} points, fewer than {}",
                    r.len(),
                    min_points.max(1)
                ),
            ));
        }
    }
    Ok(Splits {
        train: series.slice(ranges[0].clone()),
        validation: series.slice(ranges[1].clone()),
        test: series.slice(ranges[2].clone()),
        ranges,
    })
}
