//! Compute and memory cost of a model and its fit on flight hardware.
//!
//! Weights are assumed to live in ROM and activations in RAM, both as
//! 4-byte floats. Peak RAM follows a sequential schedule where only the
//! input and output buffers of the running layer are alive.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{LayerSpec, ModelSpec};

pub const BYTES_PER_ELEMENT: u64 = 4;
const KIB: u64 = 1024;

/// Multiply-accumulate count of one layer applied to `input` (per sample).
pub fn layer_macs(layer: &LayerSpec, input: &[usize]) -> Result<u64> {
    let out = layer.output_shape(input)?;
    let n = |v: usize| v as u64;
    Ok(match *layer {
        LayerSpec::Dense { inputs, outputs } => n(inputs) * n(outputs),
        LayerSpec::Conv1d {
            in_channels,
            out_channels,
            kernel_size,
            ..
        } => n(out[0]) * n(out_channels) * n(in_channels) * n(kernel_size),
        LayerSpec::DepthwiseSeparableConv1d {
            in_channels,
            out_channels,
            kernel_size,
            ..
        } => {
            n(out[0]) * n(in_channels) * n(kernel_size)
                + n(out[0]) * n(in_channels) * n(out_channels)
        }
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel_size,
            ..
        } => {
            n(out[0])
                * n(out[1])
                * n(out_channels)
                * n(in_channels)
                * n(kernel_size)
                * n(kernel_size)
        }
        LayerSpec::Maxpool1d { .. }
        | LayerSpec::GlobalAvgPool
        | LayerSpec::Activation { .. }
        | LayerSpec::Flatten => 0,
    })
}

fn elements(shape: &[usize]) -> u64 {
    shape.iter().map(|&d| d as u64).product()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCost {
    pub index: usize,
    pub kind: String,
    pub macs: u64,
    pub params: u64,
    /// Output buffer size in bytes.
    pub activation_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub layers: Vec<LayerCost>,
    pub total_macs: u64,
    pub total_params: u64,
    pub peak_ram_bytes: u64,
    pub ram_kb: u64,
    pub rom_kb: u64,
}

/// Peak live activation bytes over the sequential schedule. A model without
/// layers still holds its input and output buffer.
pub fn peak_ram(spec: &ModelSpec) -> Result<u64> {
    let shapes = spec.shapes()?;
    Ok(peak_of(&shapes))
}

fn peak_of(shapes: &[Vec<usize>]) -> u64 {
    if shapes.len() == 1 {
        return 2 * elements(&shapes[0]) * BYTES_PER_ELEMENT;
    }
    shapes
        .windows(2)
        .map(|w| (elements(&w[0]) + elements(&w[1])) * BYTES_PER_ELEMENT)
        .max()
        .unwrap_or(0)
}

pub fn profile(spec: &ModelSpec) -> Result<CostReport> {
    let shapes = spec.shapes()?;
    let mut layers = Vec::with_capacity(spec.layers.len());
    for (i, layer) in spec.layers.iter().enumerate() {
        layers.push(LayerCost {
            index: i,
            kind: layer.name().to_string(),
            macs: layer_macs(layer, &shapes[i])?,
            params: layer.n_params(),
            activation_bytes: elements(&shapes[i + 1]) * BYTES_PER_ELEMENT,
        });
    }
    let total_macs = layers.iter().map(|l| l.macs).sum();
    let total_params: u64 = layers.iter().map(|l| l.params).sum();
    let peak = peak_of(&shapes);
    Ok(CostReport {
        layers,
        total_macs,
        total_params,
        peak_ram_bytes: peak,
        ram_kb: peak.div_ceil(KIB),
        rom_kb: (total_params * BYTES_PER_ELEMENT).div_ceil(KIB),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatformBudget {
    pub name: String,
    pub ram_bytes: u64,
    pub rom_bytes: u64,
}

const MIB: u64 = KIB * KIB;
const GIB: u64 = MIB * KIB;

impl PlatformBudget {
    pub fn new(name: impl Into<String>, ram_bytes: u64, rom_bytes: u64) -> Result<Self> {
        if ram_bytes == 0 || rom_bytes == 0 {
            return Err(Error::config(
                "platform",
                "RAM and ROM sizes must be positive",
            ));
        }
        Ok(Self {
            name: name.into(),
            ram_bytes,
            rom_bytes,
        })
    }

    /// 16 MB RAM, 64 MB flash.
    pub fn cubesat() -> Self {
        Self {
            name: "cubesat".into(),
            ram_bytes: 16 * MIB,
            rom_bytes: 64 * MIB,
        }
    }

    /// 1 GB RAM, 8 GB storage.
    pub fn ops_sat() -> Self {
        Self {
            name: "ops-sat".into(),
            ram_bytes: GIB,
            rom_bytes: 8 * GIB,
        }
    }

    pub fn builtin() -> Vec<Self> {
        vec![Self::cubesat(), Self::ops_sat()]
    }

    pub fn by_name(name: &str) -> Result<Self> {
        Self::builtin()
            .into_iter()
            .find(|p| p.name == name)
            .ok_or_else(|| {
                Error::config(
                    "platform",
                    format!("unknown platform `{name}` (known: cubesat, ops-sat)"),
                )
            })
    }
}

/// Percentage of `bytes` used by `kb` kibibytes, rounded half-up to two
/// decimals. Results below 0.005 render as `< 0.01`.
pub fn format_share(kb: u64, bytes: u64) -> String {
    // hundredths of a percent: floor(10000·kb·1024/bytes + 1/2), exactly
    let num = 2 * 10_000 * u128::from(kb) * u128::from(KIB) + u128::from(bytes);
    let hundredths = num / (2 * u128::from(bytes));
    if hundredths == 0 {
        "< 0.01".to_string()
    } else {
        format!("{}.{:02}", hundredths / 100, hundredths % 100)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub platform: String,
    pub ram_pct: String,
    pub rom_pct: String,
}

pub fn budget_report(ram_kb: u64, rom_kb: u64, platform: &PlatformBudget) -> BudgetReport {
    BudgetReport {
        platform: platform.name.clone(),
        ram_pct: format_share(ram_kb, platform.ram_bytes),
        rom_pct: format_share(rom_kb, platform.rom_bytes),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetRow {
    pub system: String,
    pub ram_kb: u64,
    pub rom_kb: u64,
}

/// Plain-text table: one row per system, RAM and ROM share per platform.
pub fn budget_table(rows: &[BudgetRow], platforms: &[PlatformBudget]) -> String {
    let mut header = vec!["System".to_string(), "RAM (KB)".into(), "ROM (KB)".into()];
    for p in platforms {
        header.push(format!("{} RAM %", p.name));
        header.push(format!("{} ROM %", p.name));
    }
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut cells = vec![r.system.clone(), r.ram_kb.to_string(), r.rom_kb.to_string()];
            for p in platforms {
                let b = budget_report(r.ram_kb, r.rom_kb, p);
                cells.push(b.ram_pct);
                cells.push(b.rom_pct);
            }
            cells
        })
        .collect();
    format_table(&header, &body)
}

/// Space-aligned plain-text table; the first column is left-aligned, the
/// rest right-aligned.
pub fn format_table(header: &[String], body: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            body.iter()
                .map(|r| r[c].len())
                .chain([header[c].len()])
                .max()
                .unwrap()
        })
        .collect();
    let mut out = String::new();
    let mut line = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, &w))| {
                if i == 0 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(header);
    for r in body {
        line(r);
    }
    out
}
