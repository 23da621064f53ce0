//! Zeroth-order layer importance and the layer densities EcoFLAP derives
//! from it.

use vlcbench::param::ecoflap::{ecoflap_layer_scores, layer_densities, loss_data, zeroth_order_importance};
use vlcbench::param::EcoFlapConfig;
use vlcbench::sim::{Model, ModelConfig};

fn main() -> vlcbench::Result<()> {
    // sanity check on L(w) = |w|^2, whose expected score is 2|w|sqrt(2/pi)
    let w = vec![0.3f32, -0.4, 1.2];
    let mut rng = vlcbench::rng::stream(0, 0);
    let est = zeroth_order_importance(&w, 1e-3, 4000, &mut rng, |p| p.iter().map(|&x| f64::from(x * x)).sum())?;
    println!("quadratic: estimate {est:.4}, expected {:.4}", 2.0 * 1.3 * (2.0 / std::f64::consts::PI).sqrt());

    let mut model = Model::build(ModelConfig::default())?;
    model.set_layer_gain(3, 0.0);
    let cfg = EcoFlapConfig {
        trials: 8,
        loss_samples: 2,
        ..EcoFlapConfig::default()
    };
    let data = loss_data(&model, &cfg)?;
    let scores = ecoflap_layer_scores(&model, &data, &cfg)?;
    let sizes: Vec<usize> = (0..model.config().num_layers).map(|l| model.block_params(l).len()).collect();
    let dens = layer_densities(&scores, &sizes, 0.5, cfg.temperature)?;
    for (l, (s, d)) in scores.iter().zip(&dens).enumerate() {
        println!("layer {l}: importance {s:.5}, density {d:.3}");
    }
    println!("(layer 3 was ablated, so its score is ~0 and it is pruned hardest)");
    Ok(())
}
