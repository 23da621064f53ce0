//! Compression policies for vision-language transformers and a harness to
//! score them.
//!
//! * [`sim`]: a deterministic toy multimodal transformer with attention traces.
//! * [`token_prune`]: visual-token pruning (FastV, VisionZip, PruMerge+).
//! * [`kv`]: KV-cache scoring, budget allocation, selection and merging.
//! * [`param`]: weight pruning and post-training quantization.
//! * [`metrics`]: overall performance, generalization, loyalty, efficiency.
//! * [`harness`]: declarative experiment runner and report writer.

pub mod budget;
pub mod error;
pub mod harness;
pub mod kmeans;
pub mod kv;
pub mod metrics;
pub mod param;
pub mod rng;
pub mod sim;
pub mod token_prune;

pub use error::{Error, Result};
