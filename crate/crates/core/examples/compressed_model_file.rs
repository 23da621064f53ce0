//! Compress the whole toy model, save it, load it back and compare
//! outputs with the original.

use vlcbench::param::*;
use vlcbench::sim::{make_task, Model, ModelConfig, TaskKind, TaskParams};

fn main() -> vlcbench::Result<()> {
    let model = Model::build(ModelConfig::default())?;
    let cal = capture(
        &model,
        &CalibrationConfig {
            samples: 16,
            ..CalibrationConfig::default()
        },
    )?;
    let dir = std::env::temp_dir().join("vlcbench-example");
    std::fs::create_dir_all(&dir)?;
    let params = TaskParams {
        hidden: model.config().hidden(),
        ..TaskParams::default()
    };
    for spec in [
        ParamSpec::quantization(ParamMethod::Gptq, QuantSpec::new(4, 64)?),
        ParamSpec::pruning(ParamMethod::Wanda, SparsityPattern::Semi24),
    ] {
        let cm = compress_model(&model, &spec, Some(&cal))?;
        let path = dir.join(format!("{}.vlcp", spec.method.name()));
        write_model(&cm, &path)?;
        let loaded = read_model(&path)?;
        assert_eq!(loaded, cm);
        let compressed = loaded.apply_to(&model)?;
        let agree = (0..10)
            .filter(|&s| {
                let task = make_task(TaskKind::NeedleRetrieval, &params, s).expect("valid task");
                compressed.generate_uncached(&task.sequence, 1) == model.generate_uncached(&task.sequence, 1)
            })
            .count();
        println!(
            "{:<24} {} bytes, density {:.3}, {agree}/10 answers match the original",
            spec.label(),
            std::fs::metadata(&path)?.len(),
            cm.density()
        );
    }
    Ok(())
}
