//! Folding evicted cache rows back into the compressed cache.

use serde::{Deserialize, Serialize};

use crate::kmeans::kmeans;
use crate::sim::{HeadCache, Spans};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeStrategy {
    #[default]
    None,
    /// Each evicted row joins its most similar retained row (key cosine); the
    /// retained row becomes the equal-weight mean of itself and its joiners.
    MergeIntoRetained,
    /// As [`MergeStrategy::MergeIntoRetained`] but only within a modality.
    ModalitySpecific,
    /// Evicted rows are clustered and the centroids appended.
    ConcatCentroids,
}

/// Centroid count for [`MergeStrategy::ConcatCentroids`].
pub const CONCAT_RATIO: f64 = 6.4;
const CONCAT_MAX_ITER: usize = 20;

/// What a merge did to one head.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MergePlan {
    pub strategy: MergeStrategy,
    /// `(evicted position, target position)` pairs for merge-into strategies.
    pub assignments: Vec<(usize, usize)>,
    /// Evicted positions discarded because no retained row of their
    /// modality existed.
    pub dropped: Vec<usize>,
    /// Appended centroid rows.
    pub centroids: usize,
}

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        ab / (aa.sqrt() * bb.sqrt())
    }
}

/// Builds the compressed head from `head` (all prefill rows present) keeping
/// local rows `retained` (ascending) and merging the rest per `strategy`.
pub fn compress_head(head: &HeadCache, retained: &[usize], strategy: MergeStrategy, spans: Spans) -> (HeadCache, MergePlan) {
    let mut out = head.clone();
    out.retain_rows(retained);
    let mut plan = MergePlan {
        strategy,
        ..MergePlan::default()
    };
    let mut kept = vec![false; head.prefill_rows()];
    retained.iter().for_each(|&r| kept[r] = true);
    let evicted: Vec<usize> = (0..head.prefill_rows()).filter(|&r| !kept[r]).collect();
    if evicted.is_empty() {
        return (out, plan);
    }
    match strategy {
        MergeStrategy::None => {}
        MergeStrategy::MergeIntoRetained | MergeStrategy::ModalitySpecific => {
            let same_modality = strategy == MergeStrategy::ModalitySpecific;
            let mut joiners: Vec<Vec<usize>> = vec![Vec::new(); retained.len()];
            for &e in &evicted {
                let m = spans.modality(head.positions[e]);
                let mut best: Option<(usize, f64)> = None;
                for (slot, &r) in retained.iter().enumerate() {
                    if same_modality && spans.modality(head.positions[r]) != m {
                        continue;
                    }
                    let sim = cosine(head.key(e), head.key(r));
                    if best.is_none_or(|(_, b)| sim > b) {
                        best = Some((slot, sim));
                    }
                }
                match best {
                    Some((slot, _)) => {
                        joiners[slot].push(e);
                        plan.assignments.push((head.positions[e], head.positions[retained[slot]]));
                    }
                    None => plan.dropped.push(head.positions[e]),
                }
            }
            for (slot, (&r, js)) in retained.iter().zip(&joiners).enumerate() {
                if js.is_empty() {
                    continue;
                }
                let rows: Vec<usize> = std::iter::once(r).chain(js.iter().copied()).collect();
                let key = mean_rows(&rows, |i| head.key(i));
                let value = mean_rows(&rows, |i| head.value(i));
                out.key_mut(slot).copy_from_slice(&key);
                out.value_mut(slot).copy_from_slice(&value);
            }
        }
        MergeStrategy::ConcatCentroids => {
            let k = crate::budget::floor_fraction(1.0 / CONCAT_RATIO, retained.len()).min(evicted.len());
            let keys: Vec<&[f32]> = evicted.iter().map(|&e| head.key(e)).collect();
            let km = kmeans(&keys, k, CONCAT_MAX_ITER);
            for (c, centroid) in km.centroids.iter().enumerate() {
                let members: Vec<usize> = evicted
                    .iter()
                    .zip(&km.assignment)
                    .filter(|(_, &a)| a == c)
                    .map(|(&e, _)| e)
                    .collect();
                let value = if members.is_empty() {
                    vec![0.0; head.head_dim]
                } else {
                    mean_rows(&members, |i| head.value(i))
                };
                out.push(centroid, &value);
                out.centroids += 1;
            }
            plan.centroids = km.centroids.len();
        }
    }
    (out, plan)
}

fn mean_rows<'a>(rows: &[usize], get: impl Fn(usize) -> &'a [f32]) -> Vec<f32> {
    let dim = get(rows[0]).len();
    let mut acc = vec![0.0f64; dim];
    for &r in rows {
        for (a, &x) in acc.iter_mut().zip(get(r)) {
            *a += f64::from(x);
        }
    }
    let n = rows.len() as f64;
    acc.into_iter().map(|a| (a / n) as f32).collect()
}
