use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::calibrate::tensor_name;
use crate::budget::apportion;
use crate::rng::{self, Rng};
use crate::sim::{make_task, Answer, Model, TaskKind, TaskParams, TokenSequence, PROJECTIONS};
use crate::{Error, Result};

/// Smallest accepted finite-difference step.
pub const MIN_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EcoFlapConfig {
    pub epsilon: f64,
    pub trials: usize,
    pub temperature: f64,
    /// Needle tasks whose mean answer loss defines L.
    pub loss_samples: usize,
    pub loss_visual_len: usize,
    pub seed: u64,
}

impl Default for EcoFlapConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-2,
            trials: 32,
            temperature: 1.0,
            loss_samples: 4,
            loss_visual_len: 64,
            seed: 0xEC0F,
        }
    }
}

/// E_z |(L(w + εz) − L(w − εz)) / 2ε| with z standard normal, estimated
/// from `trials` draws.
pub fn zeroth_order_importance(
    params: &[f32],
    epsilon: f64,
    trials: usize,
    rng: &mut Rng,
    mut loss: impl FnMut(&[f32]) -> f64,
) -> Result<f64> {
    if !(epsilon.is_finite() && epsilon >= MIN_EPSILON) {
        return Err(Error::Numerical(format!("epsilon {epsilon} below {MIN_EPSILON}")));
    }
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let mut plus = params.to_vec();
    let mut minus = params.to_vec();
    let mut acc = 0.0;
    for _ in 0..trials {
        for i in 0..params.len() {
            let z = rng::normal_f64(rng) * epsilon;
            plus[i] = (params[i] as f64 + z) as f32;
            minus[i] = (params[i] as f64 - z) as f32;
        }
        acc += ((loss(&plus) - loss(&minus)) / (2.0 * epsilon)).abs();
    }
    Ok(acc / trials as f64)
}

/// Needle tasks and their answer tokens.
pub fn loss_data(model: &Model, cfg: &EcoFlapConfig) -> Result<Vec<(TokenSequence, u32)>> {
    let params = TaskParams {
        visual_len: cfg.loss_visual_len,
        hidden: model.config().hidden(),
        vocab_size: model.config().vocab_size,
        ..TaskParams::default()
    };
    (0..cfg.loss_samples)
        .map(|s| {
            let task = make_task(TaskKind::NeedleRetrieval, &params, rng::derive(cfg.seed, s as u64))?;
            let Answer::Token(t) = task.answer else {
                unreachable!("needle answers are tokens")
            };
            Ok((task.sequence, t))
        })
        .collect()
}

/// Per-block importance of the toy model under mean answer loss.
pub fn ecoflap_layer_scores(model: &Model, data: &[(TokenSequence, u32)], cfg: &EcoFlapConfig) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::Config("EcoFLAP needs at least one loss sample".into()));
    }
    (0..model.config().num_layers)
        .into_par_iter()
        .map(|layer| {
            let mut probe = model.clone();
            let base = model.block_params(layer);
            let mut r = rng::stream(cfg.seed, 0xEC00 + layer as u64);
            zeroth_order_importance(&base, cfg.epsilon, cfg.trials, &mut r, |w| {
                probe.set_block_params(layer, w);
                data.iter().map(|(seq, t)| probe.answer_loss(seq, *t)).sum::<f64>() / data.len() as f64
            })
        })
        .collect()
}

/// Per-layer kept fractions. Sparsity is proportional to a softmax of
/// negative normalized importance, rescaled (with clamping to [0, 1]) so
/// that the size-weighted mean density equals `density`.
pub fn layer_densities(scores: &[f64], sizes: &[usize], density: f64, temperature: f64) -> Result<Vec<f64>> {
    crate::budget::check_fraction(density)?;
    if scores.len() != sizes.len() || scores.is_empty() {
        return Err(Error::ShapeMismatch("one score per layer".into()));
    }
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::Config(format!("temperature must be positive, got {temperature}")));
    }
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let norm: Vec<f64> = scores
        .iter()
        .map(|&s| if mean > 0.0 { s / mean } else { 0.0 })
        .collect();
    let top = norm.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = norm.iter().map(|&g| (-(g - top) / temperature).exp()).collect();
    let total: f64 = sizes.iter().map(|&n| n as f64).sum();
    let target = (1.0 - density) * total;
    let mut sparsity = vec![0.0; w.len()];
    let mut saturated = vec![false; w.len()];
    loop {
        let fixed: f64 = (0..w.len()).filter(|&i| saturated[i]).map(|i| sizes[i] as f64).sum();
        let denom: f64 = (0..w.len()).filter(|&i| !saturated[i]).map(|i| w[i] * sizes[i] as f64).sum();
        let c = if denom > 0.0 { (target - fixed) / denom } else { 0.0 };
        let mut changed = false;
        for i in 0..w.len() {
            if saturated[i] {
                sparsity[i] = 1.0;
            } else {
                sparsity[i] = c * w[i];
                if sparsity[i] > 1.0 {
                    saturated[i] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(sparsity.into_iter().map(|s| (1.0 - s).clamp(0.0, 1.0)).collect())
}

/// Exact integer kept counts per layer summing to round(density · total).
pub fn layer_keep_counts(scores: &[f64], sizes: &[usize], density: f64, temperature: f64) -> Result<Vec<usize>> {
    let d = layer_densities(scores, sizes, density, temperature)?;
    let total: usize = sizes.iter().sum();
    let keep = ((density * total as f64).round() as usize).min(total);
    let weights: Vec<f64> = d.iter().zip(sizes).map(|(d, &n)| d * n as f64).collect();
    Ok(apportion(keep, &weights, 0, sizes))
}

/// Kept counts per tensor: layer counts split across the block's
/// projections in proportion to their sizes.
pub fn tensor_keep_counts(model: &Model, layer_keep: &[usize]) -> Vec<(String, usize)> {
    let mut out = Vec::new();
    for (l, &k) in layer_keep.iter().enumerate() {
        let block = &model.blocks()[l];
        let sizes: Vec<usize> = PROJECTIONS
            .iter()
            .map(|p| block.get(p).expect("known projection").weight.len())
            .collect();
        let w: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
        for (p, c) in PROJECTIONS.iter().zip(apportion(k, &w, 0, &sizes)) {
            out.push((tensor_name(l, p), c));
        }
    }
    out
}
