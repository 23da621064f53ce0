use super::mask::{mask_from_scores, MaskGroup, SparsityMask, SparsityPattern};
use super::tensor::{check_calibration, CalibrationSet, WeightTensor};
use crate::Result;

/// s_ij = |W_ij| · ‖X_j‖₂.
pub fn wanda_scores(w: &WeightTensor, calib: &CalibrationSet) -> Result<Vec<f64>> {
    check_calibration(w, calib)?;
    let norms = calib.column_norms();
    Ok(w
        .data
        .iter()
        .enumerate()
        .map(|(i, &v)| (v as f64).abs() * norms[i % w.cols])
        .collect())
}

pub fn wanda_mask(
    w: &WeightTensor,
    calib: &CalibrationSet,
    pattern: &SparsityPattern,
    group: MaskGroup,
) -> Result<SparsityMask> {
    let scores = wanda_scores(w, calib)?;
    mask_from_scores(&scores, w.rows, w.cols, pattern, group)
}

pub fn wanda_prune(
    w: &WeightTensor,
    calib: &CalibrationSet,
    pattern: &SparsityPattern,
    group: MaskGroup,
) -> Result<(WeightTensor, SparsityMask)> {
    let mask = wanda_mask(w, calib, pattern, group)?;
    Ok((mask.apply(w), mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_example() {
        let w = WeightTensor::new("w", 2, 2, vec![1.0, -2.0, 3.0, 4.0]).unwrap();
        // Column norms [1, 2].
        let calib = CalibrationSet::new(2, vec![vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(wanda_scores(&w, &calib).unwrap(), vec![1.0, 4.0, 3.0, 8.0]);
    }

    #[test]
    fn zero_weights_score_zero() {
        let w = WeightTensor::new("w", 2, 3, vec![0.0; 6]).unwrap();
        let calib = CalibrationSet::new(3, vec![vec![1.0, 2.0, 3.0]]).unwrap();
        assert!(wanda_scores(&w, &calib).unwrap().iter().all(|&s| s == 0.0));
    }
}
