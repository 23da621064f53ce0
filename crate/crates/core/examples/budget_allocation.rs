//! Layer budget allocation: uniform, adaptive, hybrid and pyramid.

use vlcbench::kv::{allocate, AllocationMode};
use vlcbench::sim::{make_task, Model, ModelConfig, TaskKind, TaskParams};

fn main() -> vlcbench::Result<()> {
    let model = Model::build(ModelConfig {
        num_layers: 8,
        ..ModelConfig::default()
    })?;
    let params = TaskParams {
        hidden: model.config().hidden(),
        ..TaskParams::default()
    };
    let task = make_task(TaskKind::Copy, &params, 1)?;
    let trace = model.prefill(&task.sequence)?.trace;
    println!("sequence length {}", trace.seq_len());
    for mode in [
        AllocationMode::Uniform,
        AllocationMode::Adaptive,
        AllocationMode::Hybrid { alpha: 0.4 },
        AllocationMode::Hybrid { alpha: 0.8 },
        AllocationMode::pyramid(),
    ] {
        let a = allocate(mode, 0.1, &trace)?;
        let ratios: Vec<String> = a.ratio_to_average().iter().map(|r| format!("{r:.2}")).collect();
        println!("{:<28} total {:>4} quotas {:?}", format!("{mode:?}"), a.total(), a.quotas);
        println!("{:<28} ratio to average [{}]", "", ratios.join(", "));
    }
    Ok(())
}
