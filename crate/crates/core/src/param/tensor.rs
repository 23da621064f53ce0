use nalgebra::DMatrix;

use crate::{Error, Result};

/// A named dense matrix, row-major, `rows` outputs by `cols` inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl WeightTensor {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {rows}x{cols} tensor",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite weight at index {bad}")));
        }
        Ok(Self {
            name: name.into(),
            rows,
            cols,
            data,
        })
    }

    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }

    pub fn with_data(&self, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), self.data.len());
        Self {
            name: self.name.clone(),
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }
}

/// Input activations of one projection: `samples[s]` is a column of X.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSet {
    pub features: usize,
    pub samples: Vec<Vec<f32>>,
}

impl CalibrationSet {
    pub fn new(features: usize, samples: Vec<Vec<f32>>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Config("calibration set needs at least one sample".into()));
        }
        if samples.iter().any(|s| s.len() != features) {
            return Err(Error::ShapeMismatch(format!(
                "calibration samples must have {features} features"
            )));
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite calibration activation".into()));
        }
        Ok(Self { features, samples })
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    /// Per-feature L2 norms ‖X_j‖₂.
    pub fn column_norms(&self) -> Vec<f64> {
        let mut acc = vec![0.0f64; self.features];
        for s in &self.samples {
            for (a, &v) in acc.iter_mut().zip(s) {
                *a += (v as f64) * (v as f64);
            }
        }
        acc.into_iter().map(f64::sqrt).collect()
    }

    /// Per-feature mean absolute activation.
    pub fn mean_abs(&self) -> Vec<f64> {
        let mut acc = vec![0.0f64; self.features];
        for s in &self.samples {
            for (a, &v) in acc.iter_mut().zip(s) {
                *a += (v as f64).abs();
            }
        }
        let n = self.samples.len() as f64;
        acc.into_iter().map(|a| a / n).collect()
    }

    /// X Xᵀ, `features` by `features`.
    pub fn gram(&self) -> DMatrix<f64> {
        let n = self.features;
        let mut h = DMatrix::<f64>::zeros(n, n);
        for s in &self.samples {
            let x: Vec<f64> = s.iter().map(|&v| v as f64).collect();
            for i in 0..n {
                if x[i] == 0.0 {
                    continue;
                }
                for j in i..n {
                    h[(i, j)] += x[i] * x[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                h[(i, j)] = h[(j, i)];
            }
        }
        h
    }

    fn check(&self, w: &WeightTensor) -> Result<()> {
        if w.cols != self.features {
            return Err(Error::ShapeMismatch(format!(
                "tensor `{}` has {} inputs, calibration has {} features",
                w.name, w.cols, self.features
            )));
        }
        Ok(())
    }
}

/// Default Hessian damping: 1% of the mean diagonal of X Xᵀ, floored so
/// the damped system is always invertible.
pub fn default_damping(gram: &DMatrix<f64>) -> f64 {
    let n = gram.nrows().max(1) as f64;
    let mean = gram.diagonal().sum() / n;
    (0.01 * mean).max(1e-8)
}

/// Squared output reconstruction error ‖W X − Ŵ X‖_F² over the calibration
/// samples.
pub fn reconstruction_error(w: &WeightTensor, w_hat: &WeightTensor, calib: &CalibrationSet) -> Result<f64> {
    calib.check(w)?;
    if w.rows != w_hat.rows || w.cols != w_hat.cols {
        return Err(Error::ShapeMismatch("reconstruction of a different shape".into()));
    }
    let delta: Vec<f64> = w
        .data
        .iter()
        .zip(&w_hat.data)
        .map(|(&a, &b)| a as f64 - b as f64)
        .collect();
    Ok(delta_error(&delta, w.rows, w.cols, &calib.gram()))
}

/// Σ_r δ_rᵀ H δ_r for a row-major difference matrix.
pub(crate) fn delta_error(delta: &[f64], rows: usize, cols: usize, gram: &DMatrix<f64>) -> f64 {
    let mut total = 0.0;
    for r in 0..rows {
        let d = &delta[r * cols..(r + 1) * cols];
        for i in 0..cols {
            if d[i] == 0.0 {
                continue;
            }
            let mut hi = 0.0;
            for j in 0..cols {
                hi += gram[(i, j)] * d[j];
            }
            total += d[i] * hi;
        }
    }
    total.max(0.0)
}

pub(crate) fn check_calibration(w: &WeightTensor, calib: &CalibrationSet) -> Result<()> {
    calib.check(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_matches_explicit_product() {
        let w = WeightTensor::new("w", 2, 3, vec![1.0, -2.0, 0.5, 0.0, 3.0, -1.0]).unwrap();
        let w_hat = WeightTensor::new("w", 2, 3, vec![1.0, -1.0, 0.0, 0.5, 3.0, -1.0]).unwrap();
        let xs = vec![vec![1.0, 2.0, -1.0], vec![0.5, 0.0, 4.0]];
        let calib = CalibrationSet::new(3, xs.clone()).unwrap();
        let mut expect = 0.0f64;
        for x in &xs {
            for r in 0..2 {
                let mut y = 0.0f64;
                for c in 0..3 {
                    y += (w.get(r, c) - w_hat.get(r, c)) as f64 * x[c] as f64;
                }
                expect += y * y;
            }
        }
        let got = reconstruction_error(&w, &w_hat, &calib).unwrap();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(WeightTensor::new("w", 2, 2, vec![0.0; 3]).is_err());
        assert!(WeightTensor::new("w", 1, 1, vec![f32::NAN]).is_err());
        assert!(CalibrationSet::new(2, vec![]).is_err());
        assert!(CalibrationSet::new(2, vec![vec![1.0]]).is_err());
    }
}
