//! Deterministic toy multimodal transformer: sequences, prefill with full
//! attention traces, KV caches and greedy decoding.

mod cache;
mod config;
mod model;
mod sequence;
mod task;
mod trace;
pub mod trace_io;
pub mod vocab;

pub use cache::{HeadCache, KVCacheState, LayerCache};
pub use config::ModelConfig;
pub use model::{
    argmax, cross_entropy, layer_attention_ops, rms_norm, softmax, Block, GenerationResult, Linear, Model,
    Prefill, PruneHook, PROJECTIONS,
};
pub use sequence::{Modality, Spans, TokenSequence};
pub use task::{make_task, Answer, Task, TaskKind, TaskParams};
pub use trace::{AttentionMatrix, AttentionTrace, LayerTrace};
pub use vocab::Vocabulary;
