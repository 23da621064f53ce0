//! Named KV-compression methods built from a scoring functional, an
//! allocator, a selection mode and a merge strategy.

use serde::{Deserialize, Serialize};

use super::allocation::{allocate, AllocationMode, BudgetAllocation};
use super::merge::{compress_head, MergePlan, MergeStrategy};
use super::scoring::{score_heads, ScoringFunctional};
use super::selection::{select_layer, sink_and_recent};
use crate::budget::check_fraction;
use crate::error::{Error, Result};
use crate::sim::{layer_attention_ops, AttentionTrace, KVCacheState, LayerCache};

/// Default observation window of the sliding-window functional.
pub const DEFAULT_WINDOW: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KvMethod {
    #[serde(rename = "streaming_llm", alias = "streamingllm")]
    StreamingLlm,
    H2o,
    #[serde(rename = "snapkv")]
    SnapKv,
    #[serde(rename = "pyramidkv")]
    PyramidKv,
    #[serde(rename = "lookm", alias = "look_m")]
    LookM,
    #[serde(rename = "vlcache", alias = "vl_cache")]
    VlCache,
}

impl KvMethod {
    pub const ALL: [KvMethod; 6] = [
        KvMethod::StreamingLlm,
        KvMethod::H2o,
        KvMethod::SnapKv,
        KvMethod::PyramidKv,
        KvMethod::LookM,
        KvMethod::VlCache,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            KvMethod::StreamingLlm => "streaming_llm",
            KvMethod::H2o => "h2o",
            KvMethod::SnapKv => "snapkv",
            KvMethod::PyramidKv => "pyramidkv",
            KvMethod::LookM => "lookm",
            KvMethod::VlCache => "vlcache",
        }
    }

    fn default_allocation(&self) -> AllocationMode {
        match self {
            KvMethod::PyramidKv => AllocationMode::pyramid(),
            KvMethod::VlCache => AllocationMode::Adaptive,
            _ => AllocationMode::Uniform,
        }
    }

    fn default_merge(&self) -> MergeStrategy {
        match self {
            KvMethod::LookM => MergeStrategy::MergeIntoRetained,
            _ => MergeStrategy::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationKind {
    Uniform,
    Adaptive,
    Hybrid,
    Pyramid,
}

/// Declarative KV policy, as written in run files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KvPolicySpec {
    pub method: KvMethod,
    #[serde(default = "one")]
    pub budget: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allocation: Option<AllocationKind>,
    /// Uniform share for hybrid allocation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub head_adaptive: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merge: Option<MergeStrategy>,
    /// Observation window for sliding-window scoring.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
}

fn one() -> f64 {
    1.0
}

impl KvPolicySpec {
    pub fn new(method: KvMethod, budget: f64) -> Self {
        Self {
            method,
            budget,
            allocation: None,
            alpha: None,
            head_adaptive: false,
            merge: None,
            window: None,
        }
    }
}

/// Validated, ready-to-apply KV policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KvPolicy {
    pub method: KvMethod,
    pub budget: f64,
    pub allocation: AllocationMode,
    pub head_adaptive: bool,
    pub merge: MergeStrategy,
    /// Explicit sliding window; the default is clamped to the sequence.
    pub window: Option<usize>,
}

/// Per-(layer, head) retained token indices plus the allocation behind them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionMask {
    pub seq_len: usize,
    pub allocation: BudgetAllocation,
    /// `layers[l][h]` holds the retained indices of head `h`, ascending.
    pub layers: Vec<Vec<Vec<usize>>>,
}

impl RetentionMask {
    pub fn is_kept(&self, layer: usize, head: usize, token: usize) -> bool {
        self.layers[layer][head].binary_search(&token).is_ok()
    }

    /// Retained tokens per head, summed over heads, for each layer.
    pub fn per_layer_entries(&self) -> Vec<usize> {
        self.layers
            .iter()
            .map(|l| l.iter().map(Vec::len).sum())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionReport {
    pub mask: RetentionMask,
    /// `merges[l][h]` describes what happened to evicted rows of head `h`.
    pub merges: Vec<Vec<MergePlan>>,
    /// True when a modality-specific merge had to drop evicted rows.
    pub dropped_rows: bool,
}

impl KvPolicy {
    pub fn from_spec(spec: &KvPolicySpec) -> Result<Self> {
        check_fraction(spec.budget)?;
        let m = spec.method;
        let allocation = match spec.allocation {
            None => match spec.alpha {
                Some(alpha) => AllocationMode::Hybrid { alpha },
                None => m.default_allocation(),
            },
            Some(AllocationKind::Uniform) => AllocationMode::Uniform,
            Some(AllocationKind::Adaptive) => AllocationMode::Adaptive,
            Some(AllocationKind::Pyramid) => AllocationMode::pyramid(),
            Some(AllocationKind::Hybrid) => AllocationMode::Hybrid {
                alpha: spec
                    .alpha
                    .ok_or_else(|| Error::Config("hybrid allocation needs `alpha`".into()))?,
            },
        };
        if let AllocationMode::Hybrid { alpha } = allocation {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Error::Config(format!("alpha {alpha} outside [0, 1]")));
            }
        }
        let is_pyramid = matches!(allocation, AllocationMode::Pyramid { .. });
        if (m == KvMethod::PyramidKv) != is_pyramid {
            return Err(Error::Config(
                "pyramid allocation is what defines PyramidKV; use it with pyramidkv only".into(),
            ));
        }
        if m == KvMethod::StreamingLlm && spec.head_adaptive {
            return Err(Error::Config(
                "streaming_llm selects by position, so head-adaptive selection has nothing to adapt".into(),
            ));
        }
        if spec.window.is_some() && !matches!(m, KvMethod::SnapKv | KvMethod::PyramidKv) {
            return Err(Error::Config(format!(
                "`window` only applies to sliding-window methods, not {}",
                m.name()
            )));
        }
        Ok(Self {
            method: m,
            budget: spec.budget,
            allocation,
            head_adaptive: spec.head_adaptive,
            merge: spec.merge.unwrap_or_else(|| m.default_merge()),
            window: spec.window,
        })
    }

    /// Label such as `snapkv`, `lookm_modality_specific` or `vlcache_hybrid0.4_head`.
    pub fn label(&self) -> String {
        let mut s = self.method.name().to_string();
        if self.allocation != self.method.default_allocation() {
            s.push('_');
            s.push_str(&self.allocation.label());
        }
        if self.head_adaptive {
            s.push_str("_head");
        }
        if self.merge != self.method.default_merge() {
            s.push('_');
            s.push_str(match self.merge {
                MergeStrategy::None => "nomerge",
                MergeStrategy::MergeIntoRetained => "merge",
                MergeStrategy::ModalitySpecific => "modality_specific",
                MergeStrategy::ConcatCentroids => "concat",
            });
        }
        if let Some(w) = self.window {
            s.push_str(&format!("_w{w}"));
        }
        s
    }

    pub fn functional(&self, seq_len: usize) -> Option<ScoringFunctional> {
        match self.method {
            KvMethod::StreamingLlm => None,
            KvMethod::H2o | KvMethod::LookM => Some(ScoringFunctional::Acc),
            KvMethod::SnapKv | KvMethod::PyramidKv => Some(ScoringFunctional::SlidingWindow {
                window: self.window.unwrap_or(DEFAULT_WINDOW.min(seq_len)),
            }),
            KvMethod::VlCache => Some(ScoringFunctional::PostVision),
        }
    }

    /// Decides what to keep from a prefill trace, without touching a cache.
    pub fn plan(&self, trace: &AttentionTrace) -> Result<RetentionMask> {
        let l = trace.seq_len();
        if trace.layers.iter().any(|layer| layer.len() != l) {
            return Err(Error::ShapeMismatch(
                "KV compression needs a trace without token pruning".into(),
            ));
        }
        let allocation = allocate(self.allocation, self.budget, trace)?;
        let functional = self.functional(l);
        let mut layers = Vec::with_capacity(trace.num_layers());
        for (li, layer) in trace.layers.iter().enumerate() {
            let (quota, recent) = (allocation.quotas[li], allocation.recent[li]);
            let heads = match functional {
                None => vec![sink_and_recent(l, quota, recent); layer.heads.len()],
                Some(f) => select_layer(
                    &score_heads(f, layer)?,
                    quota,
                    recent,
                    self.head_adaptive,
                    trace.spans,
                    self.method == KvMethod::LookM,
                ),
            };
            layers.push(heads);
        }
        Ok(RetentionMask {
            seq_len: l,
            allocation,
            layers,
        })
    }

    /// Score-recomputation cost charged to prefill: the `QK^T` half of the
    /// prefill attention, for every method that ranks by attention.
    pub fn selection_ops(&self, trace: &AttentionTrace, head_dim: usize) -> u64 {
        if self.functional(trace.seq_len()).is_none() {
            return 0;
        }
        trace
            .layers
            .iter()
            .map(|l| layer_attention_ops(l.len(), l.heads.len(), head_dim) / 2)
            .sum()
    }

    /// Compresses an uncompressed prefill cache in place.
    pub fn compress(&self, trace: &AttentionTrace, cache: &mut KVCacheState) -> Result<CompressionReport> {
        if cache.layers.len() != trace.num_layers()
            || cache.layers.iter().any(|l| {
                l.heads.len() != trace.num_heads()
                    || l.heads.iter().any(|h| h.prefill_rows() != trace.seq_len() || h.generated > 0)
            })
        {
            return Err(Error::ShapeMismatch("cache is not an uncompressed prefill cache of this trace".into()));
        }
        let mask = self.plan(trace)?;
        let head_dim = cache.layers[0].heads[0].head_dim;
        let mut merges = Vec::with_capacity(mask.layers.len());
        let mut dropped = false;
        for (layer, keep) in cache.layers.iter_mut().zip(&mask.layers) {
            let mut plans = Vec::with_capacity(keep.len());
            let mut heads = Vec::with_capacity(keep.len());
            for (head, rows) in layer.heads.iter().zip(keep) {
                let (h, plan) = compress_head(head, rows, self.merge, cache.spans);
                dropped |= !plan.dropped.is_empty();
                heads.push(h);
                plans.push(plan);
            }
            *layer = LayerCache { heads };
            merges.push(plans);
        }
        cache.selection_ops += self.selection_ops(trace, head_dim);
        Ok(CompressionReport {
            mask,
            merges,
            dropped_rows: dropped,
        })
    }
}
