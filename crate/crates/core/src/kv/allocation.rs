//! Per-layer cache budgets.

use serde::{Deserialize, Serialize};

use crate::budget::{apportion, check_fraction, floor_fraction};
use crate::error::{Error, Result};
use crate::sim::{AttentionTrace, LayerTrace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AllocationMode {
    /// Every layer gets `floor(b * l)`.
    Uniform,
    /// Quotas proportional to each layer's attention density.
    Adaptive,
    /// A floor of `floor(alpha * total / L)` per layer, the rest adaptive.
    Hybrid { alpha: f64 },
    /// Linear decay from `top` times the average (first layer) to `bottom`
    /// times the average (last layer).
    Pyramid { top: f64, bottom: f64 },
}

impl AllocationMode {
    pub fn pyramid() -> Self {
        AllocationMode::Pyramid { top: 1.5, bottom: 0.5 }
    }

    pub fn label(&self) -> String {
        match self {
            AllocationMode::Uniform => "uniform".into(),
            AllocationMode::Adaptive => "adaptive".into(),
            AllocationMode::Hybrid { alpha } => format!("hybrid{alpha}"),
            AllocationMode::Pyramid { .. } => "pyramid".into(),
        }
    }
}

/// Share of attention mass the density statistic must cover.
pub const COVERAGE: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetAllocation {
    pub fraction: f64,
    pub mode: AllocationMode,
    pub seq_len: usize,
    /// Retained tokens per head in each layer.
    pub quotas: Vec<usize>,
    /// Force-retained most recent tokens in each layer.
    pub recent: Vec<usize>,
}

impl BudgetAllocation {
    pub fn total(&self) -> usize {
        self.quotas.iter().sum()
    }

    pub fn average(&self) -> f64 {
        self.total() as f64 / self.quotas.len() as f64
    }

    /// Each layer's quota divided by the average quota.
    pub fn ratio_to_average(&self) -> Vec<f64> {
        let avg = self.average();
        self.quotas.iter().map(|&q| q as f64 / avg).collect()
    }
}

/// Per-layer uniform quota `floor(b * l)`, at least 1 and at most `l`.
pub fn layer_quota(b: f64, l: usize) -> usize {
    floor_fraction(b, l).clamp(1, l.max(1))
}

/// `ceil(0.1 * quota)`, at least 1, at most `quota`.
pub fn recent_window(quota: usize) -> usize {
    quota.div_ceil(10).max(1).min(quota)
}

/// Mean over heads and post-vision query rows of the smallest fraction of
/// visible keys that covers [`COVERAGE`] of the row's attention mass. Dense
/// layers score near 1, concentrated layers near 0.
pub fn layer_density(layer: &LayerTrace) -> f64 {
    let n = layer.len();
    let first = if layer.spans.text > 0 { layer.spans.visual } else { 0 };
    let mut total = 0.0;
    let mut count = 0usize;
    let mut row = Vec::with_capacity(n);
    for head in &layer.heads {
        for i in first..n {
            row.clear();
            row.extend(head.row(i)[..=i].iter().map(|&v| f64::from(v)));
            row.sort_by(|a, b| b.total_cmp(a));
            let mass: f64 = row.iter().sum();
            let mut acc = 0.0;
            let mut keys = row.len();
            for (k, v) in row.iter().enumerate() {
                acc += v;
                if acc >= COVERAGE * mass {
                    keys = k + 1;
                    break;
                }
            }
            total += keys as f64 / (i + 1) as f64;
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

pub fn allocate(mode: AllocationMode, b: f64, trace: &AttentionTrace) -> Result<BudgetAllocation> {
    let stats: Vec<f64> = match mode {
        AllocationMode::Adaptive | AllocationMode::Hybrid { .. } => trace.layers.iter().map(layer_density).collect(),
        _ => vec![1.0; trace.num_layers()],
    };
    allocate_with_stats(mode, b, trace.seq_len(), &stats)
}

/// Allocation from precomputed per-layer density statistics.
pub fn allocate_with_stats(mode: AllocationMode, b: f64, seq_len: usize, stats: &[f64]) -> Result<BudgetAllocation> {
    check_fraction(b)?;
    let layers = stats.len();
    if layers < 2 {
        return Err(Error::Config(format!("allocation needs at least 2 layers, got {layers}")));
    }
    if seq_len == 0 {
        return Err(Error::Config("cannot allocate over an empty sequence".into()));
    }
    let q = layer_quota(b, seq_len);
    let total = q * layers;
    let caps = vec![seq_len; layers];
    let quotas = match mode {
        AllocationMode::Uniform => vec![q; layers],
        AllocationMode::Adaptive => apportion(total, stats, 1, &caps),
        AllocationMode::Hybrid { alpha } => {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Error::Config(format!("hybrid alpha {alpha} outside [0, 1]")));
            }
            let floor = floor_fraction(alpha, total) / layers;
            let rest_caps: Vec<usize> = caps.iter().map(|c| c - floor).collect();
            let lo = usize::from(floor == 0);
            apportion(total - floor * layers, stats, lo, &rest_caps)
                .into_iter()
                .map(|x| x + floor)
                .collect()
        }
        AllocationMode::Pyramid { top, bottom } => {
            if top < 0.0 || bottom < 0.0 {
                return Err(Error::Config("pyramid weights must be non-negative".into()));
            }
            let w: Vec<f64> = (0..layers)
                .map(|i| top + (bottom - top) * i as f64 / (layers - 1) as f64)
                .collect();
            apportion(total, &w, 1, &caps)
        }
    };
    let recent = quotas.iter().map(|&q| recent_window(q)).collect();
    Ok(BudgetAllocation {
        fraction: b,
        mode,
        seq_len,
        quotas,
        recent,
    })
}
