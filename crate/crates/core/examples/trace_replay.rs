//! Export an attention trace to disk and replay KV policies against it.

use vlcbench::harness::{export_trace, replay};
use vlcbench::kv::{AllocationKind, KvMethod, KvPolicySpec};
use vlcbench::sim::{ModelConfig, TaskKind, TaskParams};

fn main() -> vlcbench::Result<()> {
    let path = std::env::temp_dir().join("vlcbench-example.trace");
    let trace = export_trace(&ModelConfig::default(), TaskKind::NeedleRetrieval, &TaskParams::default(), 5, &path)?;
    println!("{} layers x {} heads over {} tokens -> {}", trace.num_layers(), trace.num_heads(), trace.seq_len(), path.display());
    let mut specs = vec![KvPolicySpec::new(KvMethod::SnapKv, 0.05), KvPolicySpec::new(KvMethod::PyramidKv, 0.05)];
    for (alloc, alpha) in [(AllocationKind::Adaptive, None), (AllocationKind::Hybrid, Some(0.4))] {
        let mut s = KvPolicySpec::new(KvMethod::VlCache, 0.05);
        s.allocation = Some(alloc);
        s.alpha = alpha;
        specs.push(s);
    }
    for spec in &specs {
        let rep = replay(&path, spec)?;
        let ratios: Vec<String> = rep.ratio_to_average.iter().map(|r| format!("{r:.2}")).collect();
        println!("{:<24} quotas {:?} ratio [{}]", rep.policy, rep.quotas, ratios.join(", "));
    }
    Ok(())
}
