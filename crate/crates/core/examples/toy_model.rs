//! Build the toy vision-language model, run a few needle tasks and print
//! the analytic cost counters.

use vlcbench::sim::{make_task, Model, ModelConfig, TaskKind, TaskParams};

fn main() -> vlcbench::Result<()> {
    let config = ModelConfig::default();
    let model = Model::build(config.clone())?;
    println!(
        "{} layers x {} heads, head_dim {}, vocab {}, weights {:016x}",
        config.num_layers,
        config.num_heads,
        config.head_dim,
        config.vocab_size,
        model.weight_checksum()
    );
    let params = TaskParams {
        hidden: config.hidden(),
        vocab_size: config.vocab_size,
        ..TaskParams::default()
    };
    for kind in [TaskKind::NeedleRetrieval, TaskKind::Copy, TaskKind::Count] {
        let mut total = 0.0;
        for seed in 0..8 {
            let task = make_task(kind, &params, seed)?;
            let mut pf = model.prefill(&task.sequence)?;
            let gen = model.decode(&mut pf.cache, 4)?;
            total += task.answer.score(&gen.output);
            if seed == 0 {
                println!(
                    "{kind}: len {} -> {:?}, ttft ops {}, decode ops {}",
                    task.sequence.len(),
                    gen.output,
                    gen.ttft_ops(),
                    gen.decode_ops()
                );
            }
        }
        println!("{kind}: mean score {:.3} over 8 seeds", total / 8.0);
    }
    Ok(())
}
