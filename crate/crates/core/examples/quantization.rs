//! RTN, AWQ and GPTQ group quantization of one projection at several bit
//! widths.

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
    let name = tensor_name(2, "wo");
    let lin = model.blocks()[2].get("wo").expect("projection exists");
    let w = WeightTensor::new(name.clone(), lin.out_dim, lin.in_dim, lin.weight.clone())?;
    let x = cal.get(&name)?;
    println!("{name}: {}x{}", w.rows, w.cols);
    println!("{:>4} {:>6} {:>12} {:>12} {:>12}", "bits", "group", "rtn", "awq", "gptq");
    for (bits, group) in [(2, 16), (3, 32), (4, 64), (8, 64)] {
        let spec = QuantSpec::new(bits, group)?;
        let err = |q: QuantizedTensor| reconstruction_error(&w, &q.dequantize(), x);
        println!(
            "{bits:>4} {group:>6} {:>12.5} {:>12.5} {:>12.5}",
            err(rtn_quantize(&w, &spec)?)?,
            err(awq_quantize(&w, x, &spec)?)?,
            err(gptq_quantize(&w, x, &spec, None)?)?
        );
    }
    Ok(())
}
