//! FastV: rank visual tokens by the attention text queries pay them at an
//! early layer and drop the rest from all later layers.

use serde::{Deserialize, Serialize};

use super::{PruneBudget, PruneOutcome};
use crate::budget::{floor_fraction, top_k, top_k_of};
use crate::error::{Error, Result};
use crate::sim::{AttentionTrace, LayerTrace, Model, Prefill, PruneHook, TokenSequence};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FastVVariant {
    #[default]
    Origin,
    /// Sink tokens may not be selected.
    #[serde(rename = "a1", alias = "a1_exclude_sinks")]
    A1ExcludeSinks,
    /// Sink tokens are retained first.
    #[serde(rename = "a2", alias = "a2_force_sinks")]
    A2ForceSinks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FastVConfig {
    /// Layers below `layer` see every token; scores come from layer `layer - 1`.
    pub layer: usize,
    pub variant: FastVVariant,
    /// Fraction of visual tokens, ranked by visual-encoder attention, that
    /// form the sink set.
    pub sink_fraction: f64,
}

impl Default for FastVConfig {
    fn default() -> Self {
        Self {
            layer: 2,
            variant: FastVVariant::Origin,
            sink_fraction: 0.10,
        }
    }
}

/// Head-averaged attention that text queries pay each visual token.
pub fn fastv_layer_score(layer: &LayerTrace) -> Result<Vec<f64>> {
    let (visual, text) = (layer.spans.visual, layer.spans.text);
    if text == 0 {
        return Err(Error::EmptyTextSpan);
    }
    let n = layer.len();
    let mut scores = vec![0.0f64; visual];
    for head in &layer.heads {
        for i in visual..n {
            for (s, &a) in scores.iter_mut().zip(&head.row(i)[..visual]) {
                *s += f64::from(a);
            }
        }
    }
    let h = layer.heads.len() as f64;
    scores.iter_mut().for_each(|s| *s /= h);
    Ok(scores)
}

pub fn fastv_score(trace: &AttentionTrace, layer: usize) -> Result<Vec<f64>> {
    let lt = trace
        .layers
        .get(layer)
        .ok_or_else(|| Error::Config(format!("layer {layer} out of range")))?;
    fastv_layer_score(lt)
}

/// Top `max(1, floor(fraction * l_v))` visual tokens by encoder attention,
/// in rank order.
pub fn sink_set(cls: &[f32], fraction: f64) -> Vec<usize> {
    if cls.is_empty() {
        return Vec::new();
    }
    let k = floor_fraction(fraction, cls.len()).max(1);
    let scores: Vec<f64> = cls.iter().map(|&c| f64::from(c)).collect();
    top_k(&scores, k)
}

/// Retained visual indices (ascending) for a FastV variant.
pub fn fastv_select(scores: &[f64], cls: Option<&[f32]>, budget: PruneBudget, cfg: &FastVConfig) -> Result<Vec<usize>> {
    let lv = scores.len();
    let quota = budget.quota(lv);
    let mut keep = match cfg.variant {
        FastVVariant::Origin => top_k(scores, quota),
        variant => {
            let cls = cls.ok_or_else(|| Error::Config("FastV sink variants need visual-encoder attention".into()))?;
            if cls.len() != lv {
                return Err(Error::ShapeMismatch(format!(
                    "cls attention has {} entries for {lv} visual tokens",
                    cls.len()
                )));
            }
            let sinks = sink_set(cls, cfg.sink_fraction);
            let mut is_sink = vec![false; lv];
            sinks.iter().for_each(|&s| is_sink[s] = true);
            let others: Vec<usize> = (0..lv).filter(|&j| !is_sink[j]).collect();
            if variant == FastVVariant::A1ExcludeSinks {
                let mut keep = top_k_of(scores, &others, quota);
                if keep.len() < quota {
                    keep.extend(top_k_of(scores, &sinks, quota - keep.len()));
                }
                keep
            } else {
                let mut keep: Vec<usize> = sinks.iter().copied().take(quota).collect();
                keep.extend(top_k_of(scores, &others, quota - keep.len()));
                keep
            }
        }
    };
    keep.sort_unstable();
    Ok(keep)
}

/// Runs prefill with visual tokens pruned before layer `cfg.layer`.
pub fn fastv_prune(model: &Model, seq: &TokenSequence, budget: PruneBudget, cfg: &FastVConfig) -> Result<(Prefill, PruneOutcome)> {
    let depth = model.config().num_layers;
    if cfg.layer == 0 || cfg.layer >= depth {
        return Err(Error::Config(format!(
            "FastV layer must be in [1, {depth}), got {}",
            cfg.layer
        )));
    }
    let cls = model.visual_encoder_attention(seq);
    let mut chosen: Option<(Vec<usize>, Vec<f64>)> = None;
    let mut select = |prev: &LayerTrace| -> Result<Vec<usize>> {
        let scores = fastv_layer_score(prev)?;
        let keep = fastv_select(&scores, cls.as_deref(), budget, cfg)?;
        let mut local = keep.clone();
        local.extend(prev.spans.visual..prev.len());
        chosen = Some((keep, scores));
        Ok(local)
    };
    let prefill = model.prefill_with(
        seq,
        Some(PruneHook {
            layer: cfg.layer,
            select: &mut select,
        }),
    )?;
    let (keep, scores) = chosen.expect("hook runs once");
    Ok((prefill, PruneOutcome::new(seq.spans().visual, keep, scores, None, 0)))
}
