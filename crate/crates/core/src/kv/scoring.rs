//! Attention scoring functionals over a causal attention matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{AttentionMatrix, LayerTrace, Spans};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoringFunctional {
    /// `s_j = sum_i A_ij`.
    Acc,
    /// Accumulated attention divided by the number of queries that can see key `j`.
    Norm,
    /// Accumulated attention over the last `window` query rows.
    SlidingWindow { window: usize },
    /// Accumulated attention over the text query rows.
    PostVision,
}

/// Column sums of `a` over query rows `rows`, restricted to the causal part.
fn column_sums(a: &AttentionMatrix, rows: std::ops::Range<usize>) -> Vec<f64> {
    let n = a.size();
    let mut s = vec![0.0f64; n];
    for i in rows {
        for (sj, &v) in s.iter_mut().zip(&a.row(i)[..=i]) {
            *sj += f64::from(v);
        }
    }
    s
}

pub fn score(f: ScoringFunctional, a: &AttentionMatrix, spans: Spans) -> Result<Vec<f64>> {
    let l = a.size();
    if spans.len() != l {
        return Err(Error::ShapeMismatch(format!(
            "spans cover {} tokens, attention is {l}x{l}",
            spans.len()
        )));
    }
    Ok(match f {
        ScoringFunctional::Acc => column_sums(a, 0..l),
        ScoringFunctional::Norm => {
            let mut s = column_sums(a, 0..l);
            for (j, sj) in s.iter_mut().enumerate() {
                *sj /= (l - j) as f64;
            }
            s
        }
        ScoringFunctional::SlidingWindow { window } => {
            if window == 0 || window > l {
                return Err(Error::InvalidWindow { window, len: l });
            }
            column_sums(a, l - window..l)
        }
        ScoringFunctional::PostVision => {
            if spans.text == 0 {
                return Err(Error::EmptyTextSpan);
            }
            column_sums(a, spans.visual..l)
        }
    })
}

/// Scores of every head of a layer.
pub fn score_heads(f: ScoringFunctional, layer: &LayerTrace) -> Result<Vec<Vec<f64>>> {
    layer.heads.iter().map(|a| score(f, a, layer.spans)).collect()
}

/// Element-wise mean over heads.
pub fn mean_scores(per_head: &[Vec<f64>]) -> Vec<f64> {
    let n = per_head.first().map_or(0, Vec::len);
    let mut out = vec![0.0f64; n];
    for h in per_head {
        for (o, v) in out.iter_mut().zip(h) {
            *o += v;
        }
    }
    let k = per_head.len().max(1) as f64;
    out.iter_mut().for_each(|o| *o /= k);
    out
}
