//! Every KV-cache policy at a 5% budget on one needle task.

use vlcbench::kv::{KvMethod, KvPolicy, KvPolicySpec, MergeStrategy};
use vlcbench::sim::{make_task, Model, ModelConfig, TaskKind, TaskParams};

fn main() -> vlcbench::Result<()> {
    let model = Model::build(ModelConfig::default())?;
    let params = TaskParams {
        hidden: model.config().hidden(),
        ..TaskParams::default()
    };
    let mut specs: Vec<KvPolicySpec> = KvMethod::ALL.iter().map(|&m| KvPolicySpec::new(m, 0.05)).collect();
    let mut lookm = KvPolicySpec::new(KvMethod::LookM, 0.05);
    lookm.merge = Some(MergeStrategy::ModalitySpecific);
    specs.push(lookm);
    let mut snap = KvPolicySpec::new(KvMethod::SnapKv, 0.05);
    snap.head_adaptive = true;
    specs.push(snap);

    let mut hits = vec![0; specs.len()];
    let seeds = 10;
    let mut entries = vec![0; specs.len()];
    for seed in 0..seeds {
        let task = make_task(TaskKind::NeedleRetrieval, &params, seed)?;
        let pf = model.prefill(&task.sequence)?;
        for (i, spec) in specs.iter().enumerate() {
            let policy = KvPolicy::from_spec(spec)?;
            let mut cache = pf.cache.clone();
            policy.compress(&pf.trace, &mut cache)?;
            entries[i] = cache.retained_entries();
            let gen = model.decode(&mut cache, 1)?;
            hits[i] += task.answer.score(&gen.output) as usize;
        }
    }
    println!("full cache entries: {}", model.prefill(&make_task(TaskKind::NeedleRetrieval, &params, 0)?.sequence)?.cache.retained_entries());
    for (i, spec) in specs.iter().enumerate() {
        let label = KvPolicy::from_spec(spec)?.label();
        println!("{label:<28} entries {:>5}  needle {}/{seeds}", entries[i], hits[i]);
    }
    Ok(())
}
