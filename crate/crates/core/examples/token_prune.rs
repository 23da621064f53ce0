//! Visual-token pruning at a fixed budget: FastV (three sink variants),
//! VisionZip and PruMerge+.

use vlcbench::sim::{make_task, Model, ModelConfig, TaskKind, TaskParams};
use vlcbench::token_prune::{FastVVariant, TokenPruneMethod, TokenPruneSpec};

fn main() -> vlcbench::Result<()> {
    let model = Model::build(ModelConfig::default())?;
    let params = TaskParams {
        hidden: model.config().hidden(),
        ..TaskParams::default()
    };
    let budget = 0.05;
    let mut specs = Vec::new();
    for v in [FastVVariant::Origin, FastVVariant::A1ExcludeSinks, FastVVariant::A2ForceSinks] {
        let mut s = TokenPruneSpec::new(TokenPruneMethod::FastV, budget);
        s.variant = v;
        specs.push(s);
    }
    specs.push(TokenPruneSpec::new(TokenPruneMethod::VisionZip, budget));
    specs.push(TokenPruneSpec::new(TokenPruneMethod::PruMergePlus, budget));

    let task = make_task(TaskKind::NeedleRetrieval, &params, 3)?;
    let mut base = model.prefill(&task.sequence)?;
    let base_gen = model.decode(&mut base.cache, 1)?;
    println!("baseline: answer {:?}, ttft ops {}", base_gen.output, base_gen.ttft_ops());
    for spec in &specs {
        let (mut pf, out) = spec.run(&model, &task.sequence)?;
        let gen = model.decode(&mut pf.cache, 1)?;
        let needle_kept = out.retained.contains(&task.planted[0]);
        println!(
            "{:<14} kept {:>3}/{} visual (+{} centroids), needle kept {needle_kept:<5} score {} ttft speedup {:.2}",
            spec.label(),
            out.retained.len(),
            params.visual_len,
            out.centroids,
            task.answer.score(&gen.output),
            base_gen.ttft_ops() as f64 / gen.ttft_ops() as f64
        );
    }
    Ok(())
}
