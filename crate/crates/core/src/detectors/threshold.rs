//! Error smoothing, non-parametric thresholding and false-positive pruning.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::flag_runs;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdParams {
    /// EWMA smoothing factor in `(0, 1]`.
    #[serde(default = "ThresholdParams::default_alpha")]
    pub alpha: f64,
    /// Candidate multipliers `z` for `ε = mean + z·std`, ascending.
    #[serde(default = "ThresholdParams::default_z_grid")]
    pub z_grid: Vec<f64>,
    /// Minimum relative drop between consecutive event maxima.
    #[serde(default = "ThresholdParams::default_pruning")]
    pub pruning: f64,
    /// Flag `s > ε` when set, `s >= ε` otherwise.
    #[serde(default = "ThresholdParams::default_strict")]
    pub strict: bool,
}

impl ThresholdParams {
    fn default_alpha() -> f64 {
        0.3
    }

    fn default_z_grid() -> Vec<f64> {
        (0..=16).map(|i| 2.0 + 0.5 * f64::from(i)).collect()
    }

    fn default_pruning() -> f64 {
        0.1
    }

    fn default_strict() -> bool {
        true
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config("threshold.alpha", "must be in (0, 1]"));
        }
        if self.z_grid.is_empty() {
            return Err(Error::config("threshold.z_grid", "must not be empty"));
        }
        if self.z_grid.iter().any(|z| !z.is_finite()) {
            return Err(Error::config("threshold.z_grid", "values must be finite"));
        }
        if self.z_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config(
                "threshold.z_grid",
                "must be strictly ascending",
            ));
        }
        if !(self.pruning >= 0.0 && self.pruning < 1.0) {
            return Err(Error::config("threshold.pruning", "must be in [0, 1)"));
        }
        Ok(())
    }
}

impl Default for ThresholdParams {
    fn default() -> Self {
        Self {
            alpha: Self::default_alpha(),
            z_grid: Self::default_z_grid(),
            pruning: Self::default_pruning(),
            strict: Self::default_strict(),
        }
    }
}

/// Exponentially weighted moving average seeded with the first value.
pub fn smooth_errors(errors: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::config("threshold.alpha", "must be in (0, 1]"));
    }
    let mut out = Vec::with_capacity(errors.len());
    let mut prev = 0.0;
    for (t, &e) in errors.iter().enumerate() {
        prev = if t == 0 {
            e
        } else {
            alpha * e + (1.0 - alpha) * prev
        };
        out.push(prev);
    }
    Ok(out)
}

/// Population mean and standard deviation.
pub fn mean_std(s: &[f64]) -> (f64, f64) {
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    let var = s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn exceeds(v: f64, eps: f64, strict: bool) -> bool {
    if strict {
        v > eps
    } else {
        v >= eps
    }
}

/// Objective of one candidate `z`; zero when nothing or everything is flagged.
pub fn threshold_score(s: &[f64], z: f64, strict: bool) -> f64 {
    let (mean, std) = mean_std(s);
    if std == 0.0 {
        return 0.0;
    }
    score_at(s, mean, std, mean + z * std, strict)
}

fn score_at(s: &[f64], mean: f64, std: f64, eps: f64, strict: bool) -> f64 {
    let mut n_above = 0usize;
    let mut n_runs = 0usize;
    let mut prev = false;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for &v in s {
        let above = exceeds(v, eps, strict);
        if above {
            n_above += 1;
            if !prev {
                n_runs += 1;
            }
        } else {
            sum += v;
            sum_sq += v * v;
        }
        prev = above;
    }
    let rest = s.len() - n_above;
    if n_above == 0 || rest == 0 {
        return 0.0;
    }
    let rest_mean = sum / rest as f64;
    let rest_var = (sum_sq / rest as f64 - rest_mean * rest_mean).max(0.0);
    let d_mean = if mean == 0.0 {
        0.0
    } else {
        (mean - rest_mean) / mean
    };
    let d_std = (std - rest_var.sqrt()) / std;
    (d_mean + d_std) / (n_above + n_runs * n_runs) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdOutcome {
    pub epsilon: f64,
    /// Winning multiplier, `None` when nothing scored above zero.
    pub z: Option<f64>,
    pub score: f64,
    pub flags: Vec<u8>,
}

pub fn dynamic_threshold(s: &[f64], params: &ThresholdParams) -> Result<ThresholdOutcome> {
    params.validate()?;
    if s.len() < 2 {
        return Err(Error::Empty(
            "thresholding needs at least two smoothed errors".into(),
        ));
    }
    let (mean, std) = mean_std(s);
    let none = |epsilon| ThresholdOutcome {
        epsilon,
        z: None,
        score: 0.0,
        flags: vec![0; s.len()],
    };
    if std == 0.0 || !std.is_finite() {
        return Ok(none(mean));
    }
    let mut best: Option<(f64, f64)> = None;
    for &z in &params.z_grid {
        let score = score_at(s, mean, std, mean + z * std, params.strict);
        // strict `>` keeps the smallest z on ties
        if score > 0.0 && best.is_none_or(|(_, b)| score > b) {
            best = Some((z, score));
        }
    }
    let Some((z, score)) = best else {
        return Ok(none(mean + params.z_grid[params.z_grid.len() - 1] * std));
    };
    let epsilon = mean + z * std;
    let flags = s
        .iter()
        .map(|&v| u8::from(exceeds(v, epsilon, params.strict)))
        .collect();
    Ok(ThresholdOutcome {
        epsilon,
        z: Some(z),
        score,
        flags,
    })
}

/// Number of events to keep given their maxima sorted descending and the
/// largest unflagged value as sentinel: everything up to the deepest drop
/// exceeding `p`.
pub fn pruned_count(maxima: &[f64], sentinel: f64, p: f64) -> usize {
    let mut keep = 0;
    for i in 0..maxima.len() {
        let next = maxima.get(i + 1).copied().unwrap_or(sentinel);
        let m = maxima[i];
        if m > 0.0 && (m - next) / m > p {
            keep = i + 1;
        }
    }
    keep
}

/// Drops flagged runs whose peak does not stand out from the next one
/// down. Returns the surviving runs as inclusive index ranges in time order.
pub fn prune_anomalies(s: &[f64], flags: &[u8], p: f64) -> Result<Vec<(usize, usize)>> {
    if s.len() != flags.len() {
        return Err(Error::shape("prune_anomalies", &[s.len()], &[flags.len()]));
    }
    if !(0.0..1.0).contains(&p) {
        return Err(Error::config("threshold.pruning", "must be in [0, 1)"));
    }
    let runs = flag_runs(flags);
    if runs.is_empty() {
        return Ok(runs);
    }
    let sentinel = s
        .iter()
        .zip(flags)
        .filter(|(_, &f)| f == 0)
        .map(|(&v, _)| v)
        .fold(0.0, f64::max);
    let mut ranked: Vec<(f64, usize)> = runs
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| {
            (
                s[a..=b].iter().copied().fold(f64::NEG_INFINITY, f64::max),
                i,
            )
        })
        .collect();
    ranked.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let maxima: Vec<f64> = ranked.iter().map(|r| r.0).collect();
    let keep = pruned_count(&maxima, sentinel, p);
    let mut kept: Vec<usize> = ranked[..keep].iter().map(|r| r.1).collect();
    kept.sort_unstable();
    Ok(kept.into_iter().map(|i| runs[i]).collect())
}
