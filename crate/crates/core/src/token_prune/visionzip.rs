//! VisionZip: keep the visual tokens with the highest encoder attention and
//! recycle the rest into a few k-means centroids appended after them.

use serde::{Deserialize, Serialize};

use super::{MergedToken, PruneBudget, PruneOutcome};
use crate::budget::{floor_fraction, top_k};
use crate::error::{Error, Result};
use crate::kmeans::kmeans;
use crate::sim::{vocab, TokenSequence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisionZipConfig {
    /// Centroid count is `floor((b / ratio) * l_v)`.
    pub ratio: f64,
    pub max_iter: usize,
}

impl Default for VisionZipConfig {
    fn default() -> Self {
        Self {
            ratio: 6.4,
            max_iter: 20,
        }
    }
}

/// Number of recycled centroids for a budget, capped at the discarded count.
pub fn visionzip_centroids(budget: PruneBudget, visual: usize, cfg: &VisionZipConfig) -> usize {
    let k = floor_fraction(budget.fraction() / cfg.ratio, visual);
    k.min(visual - budget.quota(visual).min(visual))
}

pub fn visionzip_prune(
    seq: &TokenSequence,
    cls: &[f32],
    budget: PruneBudget,
    cfg: &VisionZipConfig,
) -> Result<(TokenSequence, PruneOutcome)> {
    let lv = seq.spans().visual;
    if cls.len() != lv {
        return Err(Error::ShapeMismatch(format!(
            "cls attention has {} entries for {lv} visual tokens",
            cls.len()
        )));
    }
    let scores: Vec<f64> = cls.iter().map(|&c| f64::from(c)).collect();
    let mut keep = top_k(&scores, budget.quota(lv));
    keep.sort_unstable();
    let mut kept = vec![false; lv];
    keep.iter().for_each(|&k| kept[k] = true);
    let discarded: Vec<usize> = (0..lv).filter(|&j| !kept[j]).collect();

    let k = visionzip_centroids(budget, lv, cfg);
    let points: Vec<&[f32]> = discarded.iter().map(|&j| seq.embeddings()[j].as_slice()).collect();
    let km = kmeans(&points, k, cfg.max_iter);
    let mut merged: Vec<MergedToken> = km
        .centroids
        .into_iter()
        .map(|embedding| MergedToken {
            embedding,
            members: Vec::new(),
        })
        .collect();
    for (&j, &c) in discarded.iter().zip(&km.assignment) {
        if let Some(m) = merged.get_mut(c) {
            m.members.push(j);
        }
    }

    let mut tokens: Vec<u32> = keep.iter().map(|&j| seq.tokens()[j]).collect();
    let mut emb: Vec<Vec<f32>> = keep.iter().map(|&j| seq.embeddings()[j].clone()).collect();
    for m in &merged {
        tokens.push(vocab::VISUAL_PATCH);
        emb.push(m.embedding.clone());
    }
    let pruned = seq.with_visual(tokens, emb)?;
    let centroids = merged.len();
    let merged = (centroids > 0).then_some(merged);
    Ok((pruned, PruneOutcome::new(lv, keep, scores, merged, centroids)))
}
