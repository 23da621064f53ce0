//! Visual-token pruning applied before or inside prefill.
//!
//! Every policy retains exactly `floor(b * l_v)` visual tokens (at least one
//! when there are visual tokens at all); text tokens are never pruned.

mod fastv;
mod prumerge;
mod visionzip;

use serde::{Deserialize, Serialize};

pub use fastv::{fastv_layer_score, fastv_prune, fastv_score, fastv_select, sink_set, FastVConfig, FastVVariant};
pub use prumerge::{iqr_outliers, prumerge_prune, prumerge_scores, prumerge_select, quartiles};
pub use visionzip::{visionzip_centroids, visionzip_prune, VisionZipConfig};

use crate::budget::{check_fraction, floor_fraction, top_k};
use crate::error::Result;
use crate::sim::{Model, Prefill, TokenSequence};

/// Retention budget `b` for visual tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneBudget {
    fraction: f64,
}

impl PruneBudget {
    pub fn new(fraction: f64) -> Result<Self> {
        Ok(Self {
            fraction: check_fraction(fraction)?,
        })
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }

    /// `floor(b * l_v)`, floored at 1 when `l_v > 0`.
    pub fn quota(&self, visual: usize) -> usize {
        if visual == 0 {
            0
        } else {
            floor_fraction(self.fraction, visual).max(1)
        }
    }
}

/// A synthesized visual token and the original visual indices it summarizes.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedToken {
    pub embedding: Vec<f32>,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneOutcome {
    /// Retained original visual indices, ascending.
    pub retained: Vec<usize>,
    /// `mask[j]` is true when visual token `j` is retained.
    pub mask: Vec<bool>,
    pub scores: Vec<f64>,
    /// VisionZip centroids or PruMerge+ merged retained tokens.
    pub merged: Option<Vec<MergedToken>>,
    /// Synthesized tokens appended after the retained ones (VisionZip).
    pub centroids: usize,
}

impl PruneOutcome {
    fn new(
        visual: usize,
        mut retained: Vec<usize>,
        scores: Vec<f64>,
        merged: Option<Vec<MergedToken>>,
        centroids: usize,
    ) -> Self {
        retained.sort_unstable();
        let mut mask = vec![false; visual];
        for &r in &retained {
            mask[r] = true;
        }
        Self {
            retained,
            mask,
            scores,
            merged,
            centroids,
        }
    }

    /// Visual tokens that enter the backbone after pruning.
    pub fn visual_len(&self) -> usize {
        self.retained.len() + self.centroids
    }
}

/// Keeps the top-`quota` scores, lowest index first among ties.
pub fn threshold_mask(scores: &[f64], budget: PruneBudget) -> Vec<bool> {
    let mut mask = vec![false; scores.len()];
    for i in top_k(scores, budget.quota(scores.len())) {
        mask[i] = true;
    }
    mask
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenPruneMethod {
    #[serde(rename = "fastv")]
    FastV,
    #[serde(rename = "visionzip")]
    VisionZip,
    #[serde(rename = "prumerge_plus", alias = "prumerge+")]
    PruMergePlus,
}

/// Declarative token-pruning policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenPruneSpec {
    pub method: TokenPruneMethod,
    #[serde(default = "one")]
    pub budget: f64,
    #[serde(default = "default_layer")]
    pub layer: usize,
    #[serde(default)]
    pub variant: FastVVariant,
    #[serde(default = "default_sink_fraction")]
    pub sink_fraction: f64,
}

fn one() -> f64 {
    1.0
}

fn default_layer() -> usize {
    FastVConfig::default().layer
}

fn default_sink_fraction() -> f64 {
    FastVConfig::default().sink_fraction
}

impl TokenPruneSpec {
    pub fn new(method: TokenPruneMethod, budget: f64) -> Self {
        Self {
            method,
            budget,
            layer: default_layer(),
            variant: FastVVariant::Origin,
            sink_fraction: default_sink_fraction(),
        }
    }

    /// Short label such as `fastv_a2` or `visionzip`.
    pub fn label(&self) -> String {
        match self.method {
            TokenPruneMethod::FastV => match self.variant {
                FastVVariant::Origin => "fastv".into(),
                FastVVariant::A1ExcludeSinks => "fastv_a1".into(),
                FastVVariant::A2ForceSinks => "fastv_a2".into(),
            },
            TokenPruneMethod::VisionZip => "visionzip".into(),
            TokenPruneMethod::PruMergePlus => "prumerge_plus".into(),
        }
    }

    /// Prunes `seq` and runs prefill on what remains.
    pub fn run(&self, model: &Model, seq: &TokenSequence) -> Result<(Prefill, PruneOutcome)> {
        let budget = PruneBudget::new(self.budget)?;
        match self.method {
            TokenPruneMethod::FastV => {
                let cfg = FastVConfig {
                    layer: self.layer,
                    variant: self.variant,
                    sink_fraction: self.sink_fraction,
                };
                fastv_prune(model, seq, budget, &cfg)
            }
            TokenPruneMethod::VisionZip => {
                let cls = model.visual_encoder_attention(seq).unwrap_or_default();
                let (pruned, outcome) = visionzip_prune(seq, &cls, budget, &VisionZipConfig::default())?;
                Ok((model.prefill(&pruned)?, outcome))
            }
            TokenPruneMethod::PruMergePlus => {
                let cls = model.visual_encoder_attention(seq);
                let scores = match cls.as_deref() {
                    Some(c) => prumerge_scores(Some(c), None)?,
                    None => Vec::new(),
                };
                let (pruned, outcome) = prumerge_prune(seq, &scores, budget)?;
                Ok((model.prefill(&pruned)?, outcome))
            }
        }
    }
}
