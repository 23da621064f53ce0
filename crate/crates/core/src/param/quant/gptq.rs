use super::{fit_grids, Grid, QuantSpec, QuantizedTensor};
use crate::param::sparsegpt::{inverse_hessian_upper, obs_update};
use crate::param::tensor::{check_calibration, default_damping, CalibrationSet, WeightTensor};
use crate::Result;

/// Column-sequential rounding with second-order compensation of the
/// columns not yet quantized. Grids are fitted on the original weights, so
/// GPTQ and RTN share scales and zero points.
pub fn gptq_quantize(
    w: &WeightTensor,
    calib: &CalibrationSet,
    spec: &QuantSpec,
    lambda: Option<f64>,
) -> Result<QuantizedTensor> {
    spec.validate()?;
    check_calibration(w, calib)?;
    let (rows, cols) = (w.rows, w.cols);
    let gram = calib.gram();
    let u = inverse_hessian_upper(&gram, lambda.unwrap_or_else(|| default_damping(&gram)))?;
    let (scales, zeros) = fit_grids(&w.to_f64(), rows, cols, spec);
    let ng = spec.groups_per_row(cols);
    let mut codes = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let mut row: Vec<f64> = w.row(r).iter().map(|&v| v as f64).collect();
        for j in 0..cols {
            let g = r * ng + j / spec.group_size;
            let grid = Grid {
                scale: scales[g],
                zero: zeros[g],
            };
            let q = grid.code(row[j], spec);
            codes.push(q);
            obs_update(&mut row, j, grid.value(q), &u);
        }
    }
    Ok(QuantizedTensor {
        name: w.name.clone(),
        rows,
        cols,
        spec: *spec,
        codes,
        scales,
        zeros,
        input_scales: None,
    })
}
