//! Grouped affine weight quantization.

mod awq;
mod gptq;
mod rtn;

pub use awq::{awq_quantize, awq_quantize_with_grid, AWQ_GRID};
pub use gptq::gptq_quantize;
pub use rtn::rtn_quantize;

use serde::{Deserialize, Serialize};

use super::tensor::WeightTensor;
use crate::{Error, Result};

/// Bit width and group length along the input dimension. Each group of
/// `group_size` consecutive inputs in a row shares one scale and zero point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantSpec {
    pub bits: u32,
    pub group_size: usize,
}

impl Default for QuantSpec {
    fn default() -> Self {
        Self {
            bits: 4,
            group_size: 128,
        }
    }
}

impl QuantSpec {
    pub fn new(bits: u32, group_size: usize) -> Result<Self> {
        let s = Self { bits, group_size };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=16).contains(&self.bits) {
            return Err(Error::Config(format!("bits must be in [2, 16], got {}", self.bits)));
        }
        if self.group_size == 0 {
            return Err(Error::Config("group_size must be positive".into()));
        }
        Ok(())
    }

    /// Highest code, 2^bits − 1.
    pub fn max_code(&self) -> u32 {
        (1u32 << self.bits) - 1
    }

    pub fn groups_per_row(&self, cols: usize) -> usize {
        cols.div_ceil(self.group_size)
    }

    pub fn label(&self) -> String {
        format!("w{}g{}", self.bits, self.group_size)
    }
}

/// Scale and zero point of one group: w ≈ s·(q − z), q ∈ [0, 2^bits − 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub scale: f32,
    pub zero: f32,
}

impl Grid {
    /// Min-max grid over `values`. A constant group gets s = 1 and z = −v
    /// so that it is represented exactly.
    pub fn fit(values: impl Iterator<Item = f64>, spec: &QuantSpec) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return Grid { scale: 1.0, zero: 0.0 };
        }
        let scale = ((hi - lo) / spec.max_code() as f64) as f32;
        if hi > lo && scale > 0.0 && scale.is_finite() {
            Grid {
                scale,
                zero: (-lo / scale as f64) as f32,
            }
        } else {
            Grid {
                scale: 1.0,
                zero: (-lo) as f32,
            }
        }
    }

    pub fn code(&self, w: f64, spec: &QuantSpec) -> u16 {
        let q = (w / self.scale as f64 + self.zero as f64).round();
        q.clamp(0.0, spec.max_code() as f64) as u16
    }

    pub fn value(&self, q: u16) -> f64 {
        self.scale as f64 * (q as f64 - self.zero as f64)
    }

    pub fn round(&self, w: f64, spec: &QuantSpec) -> f64 {
        self.value(self.code(w, spec))
    }
}

/// Integer codes plus per-group grids. Dequantizes as
/// Ŵ_ij = s_g·(q_ij − z_g) / t_j, where t is the optional per-input
/// activation scaling applied before quantization.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub spec: QuantSpec,
    pub codes: Vec<u16>,
    pub scales: Vec<f32>,
    pub zeros: Vec<f32>,
    pub input_scales: Option<Vec<f32>>,
}

impl QuantizedTensor {
    pub fn grid(&self, r: usize, c: usize) -> Grid {
        let g = r * self.spec.groups_per_row(self.cols) + c / self.spec.group_size;
        Grid {
            scale: self.scales[g],
            zero: self.zeros[g],
        }
    }

    pub fn dequantize_f64(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let mut v = self.grid(r, c).value(self.codes[r * self.cols + c]);
                if let Some(t) = &self.input_scales {
                    v /= t[c] as f64;
                }
                out.push(v);
            }
        }
        out
    }

    pub fn dequantize(&self) -> WeightTensor {
        WeightTensor {
            name: self.name.clone(),
            rows: self.rows,
            cols: self.cols,
            data: self.dequantize_f64().into_iter().map(|v| v as f32).collect(),
        }
    }
}

/// Fits one grid per (row, group) of a row-major f64 matrix.
pub(crate) fn fit_grids(data: &[f64], rows: usize, cols: usize, spec: &QuantSpec) -> (Vec<f32>, Vec<f32>) {
    let ng = spec.groups_per_row(cols);
    let mut scales = Vec::with_capacity(rows * ng);
    let mut zeros = Vec::with_capacity(rows * ng);
    for r in 0..rows {
        for g in 0..ng {
            let lo = g * spec.group_size;
            let hi = (lo + spec.group_size).min(cols);
            let grid = Grid::fit(data[r * cols + lo..r * cols + hi].iter().copied(), spec);
            scales.push(grid.scale);
            zeros.push(grid.zero);
        }
    }
    (scales, zeros)
}
