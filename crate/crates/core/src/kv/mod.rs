//! KV-cache compression after prefill: scoring functionals, per-layer budget
//! allocation, uniform or head-adaptive selection, and merging of evicted
//! rows. No compression happens during decode.

mod allocation;
mod merge;
mod policy;
mod scoring;
mod selection;

pub use allocation::{
    allocate, allocate_with_stats, layer_density, layer_quota, recent_window, AllocationMode, BudgetAllocation, COVERAGE,
};
pub use merge::{compress_head, MergePlan, MergeStrategy, CONCAT_RATIO};
pub use policy::{
    AllocationKind, CompressionReport, KvMethod, KvPolicy, KvPolicySpec, RetentionMask, DEFAULT_WINDOW,
};
pub use scoring::{mean_scores, score, score_heads, ScoringFunctional};
pub use selection::{select_indices, select_layer, sink_and_recent};
