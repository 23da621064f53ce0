//! Magnitude, Wanda and SparseGPT pruning of one projection of the toy
//! model, unstructured 50% and 2:4.

use vlcbench::param::*;
use vlcbench::sim::{Model, ModelConfig};

fn main() -> vlcbench::Result<()> {
    let model = Model::build(ModelConfig::default())?;
    let cal = capture(
        &model,
        &CalibrationConfig {
            samples: 16,
            ..CalibrationConfig::default()
        },
    )?;
    let name = tensor_name(1, "w_up");
    let lin = model.blocks()[1].get("w_up").expect("projection exists");
    let w = WeightTensor::new(name.clone(), lin.out_dim, lin.in_dim, lin.weight.clone())?;
    let x = cal.get(&name)?;
    println!("{name}: {}x{}, {} calibration rows", w.rows, w.cols, x.sample_count());

    for pattern in [SparsityPattern::Unstructured { density: 0.5 }, SparsityPattern::Semi24] {
        let magnitude = magnitude_mask(&w, &pattern, MaskGroup::PerRow)?;
        let (wanda, wanda_mask) = wanda_prune(&w, x, &pattern, MaskGroup::PerRow)?;
        let (sgpt, sgpt_mask) = sparsegpt_prune(&w, x, &pattern, None)?;
        println!("{pattern:?}");
        for (label, pruned, mask) in [
            ("magnitude", magnitude.apply(&w), &magnitude),
            ("wanda", wanda, &wanda_mask),
            ("sparsegpt", sgpt, &sgpt_mask),
        ] {
            println!(
                "  {label:<10} kept {:>5}/{}  2:4 {:<5} error {:.4}",
                mask.count(),
                w.len(),
                mask.satisfies_24(),
                reconstruction_error(&w, &pruned, x)?
            );
        }
    }
    Ok(())
}
