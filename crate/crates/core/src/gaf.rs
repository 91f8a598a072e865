//! Gramian Angular Field images from unit-interval series.
//!
//! Each value is read as the cosine of an angle `φ = arccos(x)`. The
//! summation field is `cos(φ_i + φ_j)` and the difference field is
//! `sin(φ_i - φ_j)`; both are evaluated through their algebraic forms so no
//! inverse trig is needed.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const RANGE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GafVariant {
    #[default]
    Summation,
    Difference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GafConfig {
    #[serde(default = "GafConfig::default_resolution")]
    pub resolution: usize,
    #[serde(default)]
    pub variant: GafVariant,
}

impl GafConfig {
    fn default_resolution() -> usize {
        224
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 {
            return Err(Error::config("gaf.resolution", "must be at least 2"));
        }
        Ok(())
    }
}

impl Default for GafConfig {
    fn default() -> Self {
        Self {
            resolution: Self::default_resolution(),
            variant: GafVariant::Summation,
        }
    }
}

/// Piecewise aggregate approximation: segment `j` averages indices
/// `[floor(jL/S), floor((j+1)L/S))`. When `S > L` a segment can be empty
/// and takes the value at its start index instead.
pub fn paa(x: &[f64], target: usize) -> Vec<f64> {
    let len = x.len();
    if len == target {
        return x.to_vec();
    }
    (0..target)
        .map(|j| {
            let lo = j * len / target;
            let hi = (j + 1) * len / target;
            if hi > lo {
                x[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
            } else {
                x[lo.min(len - 1)]
            }
        })
        .collect()
}

fn checked_unit(x: &[f64]) -> Result<Vec<f64>> {
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            if !(v.abs() <= 1.0 + RANGE_TOLERANCE) {
                Err(Error::OutOfRange { index: i, value: v })
            } else {
                Ok(v.clamp(-1.0, 1.0))
            }
        })
        .collect()
}

/// Row-major `S × S` field of a series already scaled into [-1, 1].
pub fn gaf_encode(x: &[f64], variant: GafVariant) -> Result<Vec<f64>> {
    let x = checked_unit(x)?;
    let s: Vec<f64> = x.iter().map(|v| (1.0 - v * v).sqrt()).collect();
    let n = x.len();
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            g[i * n + j] = match variant {
                GafVariant::Summation if i == j => 2.0 * x[i] * x[i] - 1.0,
                GafVariant::Summation => (x[i] * x[j] - s[i] * s[j]).clamp(-1.0, 1.0),
                GafVariant::Difference => (s[i] * x[j] - x[i] * s[j]).clamp(-1.0, 1.0),
            };
        }
    }
    Ok(g)
}

/// One field per channel of a window.
#[derive(Debug, Clone, PartialEq)]
pub struct GafStack {
    /// `[n_channels × S × S]`, row-major.
    pub images: Vec<f64>,
    pub n_channels: usize,
    pub resolution: usize,
    pub window_id: usize,
}

impl GafStack {
    pub fn image(&self, channel: usize) -> &[f64] {
        let n = self.resolution * self.resolution;
        &self.images[channel * n..(channel + 1) * n]
    }

    /// Channels-last copy `[S, S, C]` for 2-D convolution input.
    pub fn to_channels_last(&self) -> Vec<f64> {
        let n = self.resolution * self.resolution;
        let mut out = vec![0.0; n * self.n_channels];
        for c in 0..self.n_channels {
            for p in 0..n {
                out[p * self.n_channels + c] = self.images[c * n + p];
            }
        }
        out
    }
}

/// Encodes each channel of a `[length × n_channels]` window after PAA to
/// the configured resolution.
pub fn gaf_stack(
    window: &[f64],
    n_channels: usize,
    config: &GafConfig,
    window_id: usize,
) -> Result<GafStack> {
    config.validate()?;
    if n_channels == 0 || window.is_empty() || !window.len().is_multiple_of(n_channels) {
        return Err(Error::shape(
            "gaf window",
            &[window.len() / n_channels.max(1), n_channels],
            &[window.len()],
        ));
    }
    let s = config.resolution;
    let mut images = Vec::with_capacity(n_channels * s * s);
    for c in 0..n_channels {
        let column: Vec<f64> = window.iter().skip(c).step_by(n_channels).copied().collect();
        images.extend(gaf_encode(&paa(&column, s), config.variant)?);
    }
    Ok(GafStack {
        images,
        n_channels,
        resolution: s,
        window_id,
    })
}

/// 8-bit binary PGM bytes with `pixel = round_half_up((g + 1) / 2 · 255)`.
pub fn encode_pgm(image: &[f64], width: usize, height: usize) -> Result<Vec<u8>> {
    if image.len() != width * height {
        return Err(Error::shape("pgm image", &[height, width], &[image.len()]));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    for (i, &g) in image.iter().enumerate() {
        if !(g.abs() <= 1.0 + RANGE_TOLERANCE) {
            return Err(Error::OutOfRange { index: i, value: g });
        }
        let v = ((g.clamp(-1.0, 1.0) + 1.0) / 2.0 * 255.0 + 0.5).floor();
        out.push(v as u8);
    }
    Ok(out)
}

pub fn export_pgm(image: &[f64], size: usize, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_pgm(image, size, size)?)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackSidecar {
    /// `[n_channels, S, S]`
    pub shape: Vec<usize>,
    pub channel_names: Vec<String>,
    pub window_id: usize,
    pub variant: GafVariant,
}

/// Writes `<stem>.f32` (little-endian `f32`, `[C, S, S]`) and `<stem>.json`.
pub fn save_stack(
    stack: &GafStack,
    channel_names: &[String],
    variant: GafVariant,
    dir: &Path,
    stem: &str,
) -> Result<()> {
    let mut raw = fs::File::create(dir.join(format!("{stem}.f32")))?;
    let mut bytes = Vec::with_capacity(stack.images.len() * 4);
    for &v in &stack.images {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    raw.write_all(&bytes)?;
    let sidecar = StackSidecar {
        shape: vec![stack.n_channels, stack.resolution, stack.resolution],
        channel_names: channel_names.to_vec(),
        window_id: stack.window_id,
        variant,
    };
    fs::write(
        dir.join(format!("{stem}.json")),
        serde_json::to_vec_pretty(&sidecar)?,
    )?;
    Ok(())
}

pub fn load_stack(dir: &Path, stem: &str) -> Result<(GafStack, StackSidecar)> {
    let sidecar: StackSidecar =
        serde_json::from_slice(&fs::read(dir.join(format!("{stem}.json")))?)?;
    let bytes = fs::read(dir.join(format!("{stem}.f32")))?;
    let [c, h, w] = sidecar.shape[..] else {
        return Err(Error::config("shape", "expected [channels, S, S]"));
    };
    if h != w || bytes.len() != c * h * w * 4 {
        return Err(Error::shape(
            "gaf stack payload",
            &[c, h, w],
            &[bytes.len() / 4],
        ));
    }
    let images = bytes
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap())))
        .collect();
    Ok((
        GafStack {
            images,
            n_channels: c,
            resolution: h,
            window_id: sidecar.window_id,
        },
        sidecar,
    ))
}
