use nalgebra::DMatrix;

use super::mask::{row_keep_counts, SparsityMask, SparsityPattern};
use super::tensor::{check_calibration, default_damping, CalibrationSet, WeightTensor};
use crate::budget::top_k;
use crate::{Error, Result};

/// Columns per lazy mask-selection block.
pub const BLOCK: usize = 128;

/// (X Xᵀ + λI)⁻¹.
pub fn damped_inverse(gram: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Numerical(format!("damping must be positive, got {lambda}")));
    }
    let n = gram.nrows();
    let h = gram + DMatrix::<f64>::identity(n, n) * lambda;
    let chol = h
        .cholesky()
        .ok_or_else(|| Error::Numerical("damped Hessian is not positive definite".into()))?;
    Ok(chol.inverse())
}

/// Upper Cholesky factor U of (X Xᵀ + λI)⁻¹ = Uᵀ U.
pub fn inverse_hessian_upper(gram: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    let inv = damped_inverse(gram, lambda)?;
    let chol = inv
        .cholesky()
        .ok_or_else(|| Error::Numerical("inverse Hessian is not positive definite".into()))?;
    Ok(chol.l().transpose())
}

fn resolve_damping(gram: &DMatrix<f64>, lambda: Option<f64>) -> f64 {
    lambda.unwrap_or_else(|| default_damping(gram))
}

/// s_ij = W_ij² / [(X Xᵀ + λI)⁻¹]_jj.
pub fn sparsegpt_scores(w: &WeightTensor, calib: &CalibrationSet, lambda: Option<f64>) -> Result<Vec<f64>> {
    check_calibration(w, calib)?;
    let gram = calib.gram();
    let inv = damped_inverse(&gram, resolve_damping(&gram, lambda))?;
    Ok(w
        .data
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let v = v as f64;
            v * v / inv[(i % w.cols, i % w.cols)]
        })
        .collect())
}

/// Applies the optimal-brain-surgeon correction after fixing column `col` of
/// row `r` to `target`.
#[inline]
pub(crate) fn obs_update(row: &mut [f64], col: usize, target: f64, u: &DMatrix<f64>) {
    let err = (row[col] - target) / u[(col, col)];
    row[col] = target;
    if err == 0.0 {
        return;
    }
    for j in col + 1..row.len() {
        row[j] -= err * u[(col, j)];
    }
}

/// Column-sequential pruning with second-order compensation of the columns
/// not yet visited. Masks are chosen lazily per block of columns from
/// w² / U_jj², with per-row keep counts fixed up front.
pub fn sparsegpt_prune(
    w: &WeightTensor,
    calib: &CalibrationSet,
    pattern: &SparsityPattern,
    lambda: Option<f64>,
) -> Result<(WeightTensor, SparsityMask)> {
    check_calibration(w, calib)?;
    pattern.validate(w.cols)?;
    let (rows, cols) = (w.rows, w.cols);
    let gram = calib.gram();
    let u = inverse_hessian_upper(&gram, resolve_damping(&gram, lambda))?;
    let mut keep = vec![false; rows * cols];
    let row_totals = match pattern {
        SparsityPattern::Semi24 => vec![cols / 2; rows],
        p => row_keep_counts(p.keep_count(rows, cols), rows),
    };
    let block = match pattern {
        SparsityPattern::Semi24 => 4,
        _ => BLOCK,
    };

    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let mut row: Vec<f64> = w.row(r).iter().map(|&v| v as f64).collect();
        let k_r = row_totals[r];
        let mut start = 0;
        while start < cols {
            let end = (start + block).min(cols);
            let quota = k_r * end / cols - k_r * start / cols;
            let scores: Vec<f64> = (start..end)
                .map(|j| row[j] * row[j] / (u[(j, j)] * u[(j, j)]))
                .collect();
            let quota = if matches!(pattern, SparsityPattern::Semi24) { 2 } else { quota };
            for i in top_k(&scores, quota) {
                keep[r * cols + start + i] = true;
            }
            for j in start..end {
                let target = if keep[r * cols + j] { row[j] } else { 0.0 };
                obs_update(&mut row, j, target, &u);
            }
            start = end;
        }
        out.extend(row.into_iter().map(|v| v as f32));
    }
    let mask = SparsityMask { rows, cols, keep };
    // Kept weights are updated in place; pruned ones are exactly zero.
    Ok((w.with_data(out), mask))
}
