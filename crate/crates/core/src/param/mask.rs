use serde::{Deserialize, Serialize};

use super::tensor::WeightTensor;
use crate::budget::top_k;
use crate::{Error, Result};

/// Which weights survive pruning. `density` is the kept fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SparsityPattern {
    Unstructured { density: f64 },
    /// Two kept weights in every run of four along the input dimension.
    Semi24,
}

impl SparsityPattern {
    pub fn validate(&self, cols: usize) -> Result<()> {
        match *self {
            SparsityPattern::Unstructured { density } => {
                crate::budget::check_fraction(density)?;
            }
            SparsityPattern::Semi24 => {
                if cols % 4 != 0 {
                    return Err(Error::ShapeMismatch(format!(
                        "2:4 sparsity needs a multiple of 4 inputs, got {cols}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn density(&self) -> f64 {
        match *self {
            SparsityPattern::Unstructured { density } => density,
            SparsityPattern::Semi24 => 0.5,
        }
    }

    /// Number of ones in a mask of this pattern over `rows × cols`.
    pub fn keep_count(&self, rows: usize, cols: usize) -> usize {
        let n = rows * cols;
        match *self {
            SparsityPattern::Unstructured { density } => ((density * n as f64).round() as usize).min(n),
            SparsityPattern::Semi24 => n / 2,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            SparsityPattern::Unstructured { density } => format!("unstructured({density})"),
            SparsityPattern::Semi24 => "2:4".into(),
        }
    }
}

/// Comparison group for top-k selection of unstructured masks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskGroup {
    #[default]
    PerRow,
    Global,
}

/// Binary keep-mask over a weight matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityMask {
    pub rows: usize,
    pub cols: usize,
    pub keep: Vec<bool>,
}

impl SparsityMask {
    pub fn full(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            keep: vec![true; rows * cols],
        }
    }

    pub fn count(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }

    pub fn is_kept(&self, r: usize, c: usize) -> bool {
        self.keep[r * self.cols + c]
    }

    /// Exhaustive scan: every aligned run of four inputs keeps exactly two.
    pub fn satisfies_24(&self) -> bool {
        self.cols % 4 == 0
            && self.keep.chunks_exact(4).all(|g| g.iter().filter(|&&k| k).count() == 2)
    }

    pub fn satisfies(&self, pattern: &SparsityPattern) -> bool {
        match pattern {
            SparsityPattern::Semi24 => self.satisfies_24(),
            p @ SparsityPattern::Unstructured { .. } => self.count() == p.keep_count(self.rows, self.cols),
        }
    }

    pub fn apply(&self, w: &WeightTensor) -> WeightTensor {
        assert_eq!((w.rows, w.cols), (self.rows, self.cols));
        let data = w
            .data
            .iter()
            .zip(&self.keep)
            .map(|(&v, &k)| if k { v } else { 0.0 })
            .collect();
        w.with_data(data)
    }
}

/// Splits `total` kept entries across `rows` so that the running sum after
/// row r is ⌊total·(r+1)/rows⌋.
pub fn row_keep_counts(total: usize, rows: usize) -> Vec<usize> {
    if rows == 0 {
        return Vec::new();
    }
    let cum = |r: usize| total * r / rows;
    (0..rows).map(|r| cum(r + 1) - cum(r)).collect()
}

/// Keeps the `keep_total` highest scores, per row or globally.
pub fn mask_with_count(scores: &[f64], rows: usize, cols: usize, keep_total: usize, group: MaskGroup) -> SparsityMask {
    assert_eq!(scores.len(), rows * cols);
    let keep_total = keep_total.min(rows * cols);
    let mut keep = vec![false; rows * cols];
    match group {
        MaskGroup::Global => {
            for i in top_k(scores, keep_total) {
                keep[i] = true;
            }
        }
        MaskGroup::PerRow => {
            for (r, k) in row_keep_counts(keep_total, rows).into_iter().enumerate() {
                for c in top_k(&scores[r * cols..(r + 1) * cols], k) {
                    keep[r * cols + c] = true;
                }
            }
        }
    }
    SparsityMask { rows, cols, keep }
}

/// Keeps the two highest scores in every aligned run of four.
pub fn mask_24(scores: &[f64], rows: usize, cols: usize) -> SparsityMask {
    assert_eq!(scores.len(), rows * cols);
    assert_eq!(cols % 4, 0);
    let mut keep = vec![false; rows * cols];
    for (g, chunk) in scores.chunks_exact(4).enumerate() {
        for i in top_k(chunk, 2) {
            keep[g * 4 + i] = true;
        }
    }
    SparsityMask { rows, cols, keep }
}

pub fn mask_from_scores(
    scores: &[f64],
    rows: usize,
    cols: usize,
    pattern: &SparsityPattern,
    group: MaskGroup,
) -> Result<SparsityMask> {
    pattern.validate(cols)?;
    Ok(match pattern {
        SparsityPattern::Semi24 => mask_24(scores, rows, cols),
        p => mask_with_count(scores, rows, cols, p.keep_count(rows, cols), group),
    })
}

/// Plain magnitude pruning, the uncompensated baseline.
pub fn magnitude_mask(w: &WeightTensor, pattern: &SparsityPattern, group: MaskGroup) -> Result<SparsityMask> {
    let scores: Vec<f64> = w.data.iter().map(|&v| (v as f64).abs()).collect();
    mask_from_scores(&scores, w.rows, w.cols, pattern, group)
}
