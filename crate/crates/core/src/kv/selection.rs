//! Turning scores and quotas into retained index sets.

use crate::sim::{Modality, Spans};

/// Retained indices for one head: the last `recent` indices, then the
/// highest-scoring others up to `quota`. With `text_prior`, text tokens win
/// score ties against visual ones; remaining ties go to the lower index.
pub fn select_indices(scores: &[f64], quota: usize, recent: usize, spans: Spans, text_prior: bool) -> Vec<usize> {
    let l = scores.len();
    let quota = quota.min(l);
    let recent = recent.min(quota);
    let split = l - recent;
    let mut cand: Vec<usize> = (0..split).collect();
    cand.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| {
                if text_prior {
                    let rank = |i: usize| u8::from(spans.modality(i) == Modality::Visual);
                    rank(a).cmp(&rank(b))
                } else {
                    std::cmp::Ordering::Equal
                }
            })
            .then(a.cmp(&b))
    });
    cand.truncate(quota - recent);
    cand.extend(split..l);
    cand.sort_unstable();
    cand
}

/// Per-head retained sets for a layer. Uniform selection ranks the
/// head-averaged scores and shares one set; head-adaptive selection ranks
/// each head's own scores.
pub fn select_layer(
    head_scores: &[Vec<f64>],
    quota: usize,
    recent: usize,
    head_adaptive: bool,
    spans: Spans,
    text_prior: bool,
) -> Vec<Vec<usize>> {
    if head_adaptive {
        head_scores
            .iter()
            .map(|s| select_indices(s, quota, recent, spans, text_prior))
            .collect()
    } else {
        let shared = select_indices(&super::scoring::mean_scores(head_scores), quota, recent, spans, text_prior);
        vec![shared; head_scores.len()]
    }
}

/// StreamingLLM: the first `quota - recent` tokens plus the last `recent`.
pub fn sink_and_recent(l: usize, quota: usize, recent: usize) -> Vec<usize> {
    let quota = quota.min(l);
    let recent = recent.min(quota);
    let sinks = quota - recent;
    (0..sinks).chain(l - recent..l).collect()
}
