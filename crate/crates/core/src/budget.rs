//! Budget arithmetic shared by every policy.

use crate::error::{Error, Result};

/// Slack added before flooring so that products such as `0.29 * 100` land on
/// the intended integer despite binary rounding.
const FLOOR_SLACK: f64 = 1e-9;

pub fn check_fraction(b: f64) -> Result<f64> {
    if b.is_finite() && b > 0.0 && b <= 1.0 {
        Ok(b)
    } else {
        Err(Error::InvalidBudget(b))
    }
}

/// `floor(b * n)`.
pub fn floor_fraction(b: f64, n: usize) -> usize {
    ((b * n as f64 + FLOOR_SLACK).floor() as usize).min(n)
}

/// Indices of the `k` largest scores, lowest index first among ties,
/// returned in rank order.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Like [`top_k`] but restricted to `candidates`, which must be distinct.
pub fn top_k_of(scores: &[f64], candidates: &[usize], k: usize) -> Vec<usize> {
    let mut idx = candidates.to_vec();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Splits `total` into integer parts proportional to `weights`, each part in
/// `[lo, hi[i]]`, summing to `total` exactly (largest-remainder rounding with
/// water-filling against the caps). Ties go to the lower index.
pub fn apportion(total: usize, weights: &[f64], lo: usize, hi: &[usize]) -> Vec<usize> {
    let n = weights.len();
    assert_eq!(hi.len(), n);
    let cap: usize = hi.iter().sum();
    assert!(lo * n <= total && total <= cap, "apportion target {total} infeasible");
    let mut out = vec![lo; n];
    let mut left = total - lo * n;
    let mut open: Vec<usize> = (0..n).filter(|&i| hi[i] > lo).collect();
    while left > 0 {
        let wsum: f64 = open.iter().map(|&i| weights[i].max(0.0)).sum();
        let share = |i: usize| {
            if wsum > 0.0 {
                weights[i].max(0.0) / wsum * left as f64
            } else {
                left as f64 / open.len() as f64
            }
        };
        let mut saturated = false;
        let mut given = 0;
        let mut rema = Vec::with_capacity(open.len());
        for &i in &open {
            let want = share(i);
            let room = hi[i] - out[i];
            let whole = (want.floor() as usize).min(room);
            out[i] += whole;
            given += whole;
            if whole == room {
                saturated = true;
            } else {
                rema.push((want - whole as f64, i));
            }
        }
        left -= given;
        if !saturated || given == 0 {
            rema.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            for &(_, i) in rema.iter().take(left) {
                out[i] += 1;
            }
            left -= left.min(rema.len());
        }
        open.retain(|&i| out[i] < hi[i]);
    }
    out
}
