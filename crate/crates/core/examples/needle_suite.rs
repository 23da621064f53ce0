//! Needle retrieval at a 1% budget for token pruning and KV policies, with
//! 95% Wilson intervals. Pass a sample count as the first argument.

use vlcbench::harness::{run, RunSpec, Sweep};
use vlcbench::kv::{KvMethod, KvPolicySpec};
use vlcbench::metrics::efficiency;
use vlcbench::sim::TaskKind;
use vlcbench::token_prune::{FastVVariant, TokenPruneMethod, TokenPruneSpec};

fn wilson(k: usize, n: usize) -> (f64, f64) {
    let (z, n) = (1.96f64, n as f64);
    let p = k as f64 / n;
    let centre = (p + z * z / (2.0 * n)) / (1.0 + z * z / n);
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / (1.0 + z * z / n);
    (centre - half, centre + half)
}

fn main() -> vlcbench::Result<()> {
    let samples = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(40);
    let mut spec = RunSpec {
        name: "needle".into(),
        budgets: vec![0.01],
        decode_steps: 1,
        ..RunSpec::default()
    };
    spec.suite.kinds = vec![TaskKind::NeedleRetrieval];
    spec.suite.samples = samples;
    for v in [FastVVariant::Origin, FastVVariant::A1ExcludeSinks, FastVVariant::A2ForceSinks] {
        let mut s = TokenPruneSpec::new(TokenPruneMethod::FastV, 1.0);
        s.variant = v;
        spec.token_prune.push(Sweep::swept(s));
    }
    spec.token_prune.push(Sweep::swept(TokenPruneSpec::new(TokenPruneMethod::VisionZip, 1.0)));
    spec.kv = KvMethod::ALL.iter().map(|&m| Sweep::swept(KvPolicySpec::new(m, 1.0))).collect();

    let out = run(&spec)?;
    println!("{:<16} {:>6} {:>17} {:>8}", "method", "acc", "95% CI", "TTFT x");
    for r in &out.records {
        let k = (r.score * samples as f64).round() as usize;
        let (lo, hi) = wilson(k, samples);
        let ttft = efficiency(std::slice::from_ref(r))?.ttft;
        println!("{:<16} {:>6.3} [{lo:.3}, {hi:.3}] {ttft:>8.2}", r.method, r.score);
    }
    Ok(())
}
