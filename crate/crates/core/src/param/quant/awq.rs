use super::rtn::rtn_scaled;
use super::{QuantSpec, QuantizedTensor};
use crate::param::tensor::{check_calibration, delta_error, CalibrationSet, WeightTensor};
use crate::Result;

/// Scaling exponents searched per column group.
pub const AWQ_GRID: usize = 20;

const MIN_SCALE: f64 = 1e-4;

/// Activation-aware quantization: inputs are scaled by t_j = (n_j / max n)^α
/// before rounding, with n_j the mean absolute activation of input j, and α
/// chosen per column group to minimize ‖W X − Ŵ X‖_F². Groups are visited
/// once in order, each starting from α = 0, so the result is never worse
/// than RTN on the calibration set.
pub fn awq_quantize(w: &WeightTensor, calib: &CalibrationSet, spec: &QuantSpec) -> Result<QuantizedTensor> {
    let grid: Vec<f64> = (0..AWQ_GRID).map(|i| i as f64 / (AWQ_GRID - 1) as f64).collect();
    awq_quantize_with_grid(w, calib, spec, &grid)
}

/// [`awq_quantize`] over an explicit list of exponents. The first entry is
/// the starting point for every group.
pub fn awq_quantize_with_grid(
    w: &WeightTensor,
    calib: &CalibrationSet,
    spec: &QuantSpec,
    alphas: &[f64],
) -> Result<QuantizedTensor> {
    spec.validate()?;
    check_calibration(w, calib)?;
    let cols = w.cols;
    let gram = calib.gram();
    let act = calib.mean_abs();
    let peak = act.iter().cloned().fold(0.0f64, f64::max);
    let scales_for = |alpha: f64, j: usize| -> f32 {
        if peak > 0.0 {
            (act[j] / peak).powf(alpha).max(MIN_SCALE) as f32
        } else {
            1.0
        }
    };
    let start = alphas.first().copied().unwrap_or(0.0);
    let mut t: Vec<f32> = (0..cols).map(|j| scales_for(start, j)).collect();
    let error_of = |t: &[f32]| -> (f64, QuantizedTensor) {
        let q = rtn_scaled(w, spec, Some(t.to_vec()));
        let delta: Vec<f64> = w
            .data
            .iter()
            .zip(q.dequantize_f64())
            .map(|(&a, b)| a as f64 - b)
            .collect();
        (delta_error(&delta, w.rows, cols, &gram), q)
    };
    let (mut best_err, mut best) = error_of(&t);
    for g in 0..spec.groups_per_row(cols) {
        let range = g * spec.group_size..((g + 1) * spec.group_size).min(cols);
        let current: Vec<f32> = t[range.clone()].to_vec();
        let mut chosen = current;
        for &alpha in alphas.iter().skip(1) {
            for j in range.clone() {
                t[j] = scales_for(alpha, j);
            }
            let (err, q) = error_of(&t);
            if err < best_err {
                best_err = err;
                best = q;
                chosen = t[range.clone()].to_vec();
            }
        }
        t[range].copy_from_slice(&chosen);
    }
    Ok(best)
}
