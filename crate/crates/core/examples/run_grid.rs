//! Describe an experiment grid in TOML, run it, archive it and report.

use vlcbench::harness::{read_archive, report_archive, run, write_archive, RunSpec};
use vlcbench::metrics::Agreement;

const SPEC: &str = r#"
name = "example"
seed = 7
budgets = [0.05, 0.2]
decode_steps = 2

[suite]
kinds = ["needle_retrieval"]
samples = 6
visual_len = 160
text_len = 16

[[token_prune]]
method = "fastv"
variant = "a2_force_sinks"

[[kv]]
method = "snapkv"

[[kv]]
method = "vlcache"
budget = 0.05
alpha = 0.4
"#;

fn main() -> vlcbench::Result<()> {
    let spec = RunSpec::from_toml(SPEC)?;
    println!("{} grid points, spec hash {}", spec.grid().len(), &spec.hash()?[..12]);
    let out = run(&spec)?;
    let dir = std::env::temp_dir().join("vlcbench-example").join(&spec.name);
    write_archive(&dir, &spec, &out)?;
    let archive = read_archive(&dir)?;
    println!("{} records in {}", archive.records.len(), dir.display());
    let report = report_archive(&dir, Agreement::ExactMatch)?;
    for m in &report.methods {
        println!("{:<24} OL {:.3} OE {:.2} TTFT x{:.2}", m.method, m.ol, m.oe, m.ttft_speedup);
    }
    for e in &report.op {
        println!("OP {:<24} {:.3}", e.method, e.op);
    }
    Ok(())
}
