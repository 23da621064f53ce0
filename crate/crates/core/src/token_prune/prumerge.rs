//! PruMerge+: keep IQR outliers of the visual importance score, top up to the
//! quota by stride sampling, then fold every pruned token into its most
//! similar retained token.

use super::{MergedToken, PruneBudget, PruneOutcome};
use crate::budget::top_k_of;
use crate::error::{Error, Result};
use crate::sim::{LayerTrace, TokenSequence};

/// Importance scores: encoder attention when present, otherwise the mean
/// attention each visual token receives from the queries that can see it.
pub fn prumerge_scores(cls: Option<&[f32]>, layer: Option<&LayerTrace>) -> Result<Vec<f64>> {
    if let Some(cls) = cls {
        return Ok(cls.iter().map(|&c| f64::from(c)).collect());
    }
    let layer = layer.ok_or_else(|| Error::Config("PruMerge+ needs cls attention or an attention layer".into()))?;
    let mean = layer.mean_over_heads();
    let n = layer.len();
    Ok((0..layer.spans.visual)
        .map(|j| (j..n).map(|i| f64::from(mean.get(i, j))).sum::<f64>() / (n - j) as f64)
        .collect())
}

/// First and third quartiles with linear interpolation between order
/// statistics.
pub fn quartiles(scores: &[f64]) -> (f64, f64) {
    let mut v = scores.to_vec();
    v.sort_by(f64::total_cmp);
    let at = |q: f64| {
        let pos = q * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    (at(0.25), at(0.75))
}

/// Indices strictly above the upper fence `Q3 + 1.5 * IQR`, in rank order.
pub fn iqr_outliers(scores: &[f64]) -> Vec<usize> {
    if scores.is_empty() {
        return Vec::new();
    }
    let (q1, q3) = quartiles(scores);
    let fence = q3 + 1.5 * (q3 - q1);
    let above: Vec<usize> = (0..scores.len()).filter(|&j| scores[j] > fence).collect();
    top_k_of(scores, &above, above.len())
}

/// Retained indices (ascending): outliers first, then a uniform stride over
/// the remaining tokens ordered by score.
pub fn prumerge_select(scores: &[f64], quota: usize) -> Vec<usize> {
    let mut keep = iqr_outliers(scores);
    keep.truncate(quota);
    if keep.len() < quota {
        let mut taken = vec![false; scores.len()];
        keep.iter().for_each(|&k| taken[k] = true);
        let rest: Vec<usize> = (0..scores.len()).filter(|&j| !taken[j]).collect();
        let ranked = top_k_of(scores, &rest, rest.len());
        let need = quota - keep.len();
        keep.extend((0..need).map(|i| ranked[i * ranked.len() / need]));
    }
    keep.sort_unstable();
    keep
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

pub fn prumerge_prune(seq: &TokenSequence, scores: &[f64], budget: PruneBudget) -> Result<(TokenSequence, PruneOutcome)> {
    let lv = seq.spans().visual;
    if scores.len() != lv {
        return Err(Error::ShapeMismatch(format!(
            "{} scores for {lv} visual tokens",
            scores.len()
        )));
    }
    let keep = prumerge_select(scores, budget.quota(lv));
    let emb = seq.embeddings();
    let mut kept = vec![false; lv];
    keep.iter().for_each(|&k| kept[k] = true);

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); keep.len()];
    for j in (0..lv).filter(|&j| !kept[j]) {
        let mut best = 0;
        let mut best_sim = f64::NEG_INFINITY;
        for (slot, &r) in keep.iter().enumerate() {
            let sim = cosine(&emb[j], &emb[r]);
            if sim > best_sim {
                best = slot;
                best_sim = sim;
            }
        }
        members[best].push(j);
    }

    let mut merged = Vec::with_capacity(keep.len());
    let mut new_emb = Vec::with_capacity(keep.len());
    for (&r, assigned) in keep.iter().zip(&members) {
        let mut group = vec![r];
        group.extend(assigned);
        let e = if assigned.is_empty() {
            emb[r].clone()
        } else {
            weighted_mean(&group, scores, emb)
        };
        new_emb.push(e.clone());
        merged.push(MergedToken {
            embedding: e,
            members: group,
        });
    }
    let tokens = keep.iter().map(|&j| seq.tokens()[j]).collect();
    let pruned = seq.with_visual(tokens, new_emb)?;
    Ok((pruned, PruneOutcome::new(lv, keep, scores.to_vec(), Some(merged), 0)))
}

/// Score-weighted average of the embeddings in `group`; plain mean when the
/// weights sum to zero.
fn weighted_mean(group: &[usize], scores: &[f64], emb: &[Vec<f32>]) -> Vec<f32> {
    let total: f64 = group.iter().map(|&g| scores[g].max(0.0)).sum();
    let dim = emb[group[0]].len();
    let mut acc = vec![0.0f64; dim];
    for &g in group {
        let w = if total > 0.0 {
            scores[g].max(0.0) / total
        } else {
            1.0 / group.len() as f64
        };
        for (a, &x) in acc.iter_mut().zip(&emb[g]) {
            *a += w * f64::from(x);
        }
    }
    acc.into_iter().map(|x| x as f32).collect()
}
