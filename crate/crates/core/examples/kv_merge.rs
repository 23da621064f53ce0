//! What happens to evicted KV rows under each merge strategy.

use vlcbench::kv::{compress_head, select_indices, MergeStrategy, recent_window};
use vlcbench::sim::{make_task, Model, ModelConfig, TaskKind, TaskParams};

fn main() -> vlcbench::Result<()> {
    let model = Model::build(ModelConfig::default())?;
    let params = TaskParams {
        visual_len: 96,
        text_len: 16,
        hidden: model.config().hidden(),
        ..TaskParams::default()
    };
    let task = make_task(TaskKind::Copy, &params, 2)?;
    let pf = model.prefill(&task.sequence)?;
    let spans = task.sequence.spans();
    let head = &pf.cache.layers[1].heads[0];
    let scores = vlcbench::kv::score(vlcbench::kv::ScoringFunctional::Acc, &pf.trace.layers[1].heads[0], spans)?;
    let quota = 12;
    let keep = select_indices(&scores, quota, recent_window(quota), spans, false);
    println!("kept positions {keep:?}");
    for strategy in [
        MergeStrategy::None,
        MergeStrategy::MergeIntoRetained,
        MergeStrategy::ModalitySpecific,
        MergeStrategy::ConcatCentroids,
    ] {
        let (out, plan) = compress_head(head, &keep, strategy, spans);
        let cross = plan
            .assignments
            .iter()
            .filter(|&&(e, t)| spans.modality(e) != spans.modality(t))
            .count();
        println!(
            "{:<20} rows {:>3}, merged {:>3} ({} cross-modal), dropped {:>3}, centroids {}",
            format!("{strategy:?}"),
            out.rows(),
            plan.assignments.len(),
            cross,
            plan.dropped.len(),
            out.centroids
        );
    }
    Ok(())
}
