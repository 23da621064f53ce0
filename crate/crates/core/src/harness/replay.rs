use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::kv::{KvPolicy, KvPolicySpec, RetentionMask};
use crate::sim::trace_io::{read_trace, write_trace};
use crate::sim::{make_task, AttentionTrace, Model, ModelConfig, TaskKind, TaskParams};
use crate::Result;

/// Runs one prefill and stores its attention trace.
pub fn export_trace(config: &ModelConfig, kind: TaskKind, params: &TaskParams, seed: u64, path: &Path) -> Result<AttentionTrace> {
    let model = Model::build(config.clone())?;
    let params = TaskParams {
        hidden: config.hidden(),
        vocab_size: config.vocab_size,
        ..params.clone()
    };
    let task = make_task(kind, &params, seed)?;
    let trace = model.prefill(&task.sequence)?.trace;
    write_trace(&trace, path)?;
    Ok(trace)
}

/// Layer budget distribution and retained indices of a KV policy applied to
/// a stored trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub policy: String,
    pub seq_len: usize,
    pub quotas: Vec<usize>,
    pub average: f64,
    pub ratio_to_average: Vec<f64>,
    pub mask: RetentionMask,
}

pub fn replay_trace(trace: &AttentionTrace, spec: &KvPolicySpec) -> Result<ReplayReport> {
    let policy = KvPolicy::from_spec(spec)?;
    let mask = policy.plan(trace)?;
    Ok(ReplayReport {
        policy: policy.label(),
        seq_len: mask.seq_len,
        quotas: mask.allocation.quotas.clone(),
        average: mask.allocation.average(),
        ratio_to_average: mask.allocation.ratio_to_average(),
        mask,
    })
}

pub fn replay(path: &Path, spec: &KvPolicySpec) -> Result<ReplayReport> {
    replay_trace(&read_trace(path)?, spec)
}
