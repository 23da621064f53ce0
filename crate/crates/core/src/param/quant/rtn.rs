use super::{fit_grids, Grid, QuantSpec, QuantizedTensor};
use crate::param::tensor::WeightTensor;
use crate::Result;

/// Round-to-nearest on per-group min-max grids.
pub fn rtn_quantize(w: &WeightTensor, spec: &QuantSpec) -> Result<QuantizedTensor> {
    spec.validate()?;
    Ok(rtn_scaled(w, spec, None))
}

/// RTN of W·diag(t), remembering t for dequantization.
pub(crate) fn rtn_scaled(w: &WeightTensor, spec: &QuantSpec, input_scales: Option<Vec<f32>>) -> QuantizedTensor {
    let (rows, cols) = (w.rows, w.cols);
    let data: Vec<f64> = match &input_scales {
        None => w.to_f64(),
        Some(t) => w
            .data
            .iter()
            .enumerate()
            .map(|(i, &v)| v as f64 * t[i % cols] as f64)
            .collect(),
    };
    let (scales, zeros) = fit_grids(&data, rows, cols, spec);
    let ng = spec.groups_per_row(cols);
    let codes = data
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let (r, c) = (i / cols, i % cols);
            let g = r * ng + c / spec.group_size;
            Grid {
                scale: scales[g],
                zero: zeros[g],
            }
            .code(v, spec)
        })
        .collect();
    QuantizedTensor {
        name: w.name.clone(),
        rows,
        cols,
        spec: *spec,
        codes,
        scales,
        zeros,
        input_scales,
    }
}
