use super::sequence::Spans;

/// Square causal attention matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMatrix {
    n: usize,
    data: Vec<f32>,
}

impl AttentionMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(n: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), n * n, "attention data must be n*n");
        Self { n, data }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, query: usize, key: usize) -> f32 {
        self.data[query * self.n + key]
    }

    pub fn set(&mut self, query: usize, key: usize, v: f32) {
        self.data[query * self.n + key] = v;
    }

    pub fn row(&self, query: usize) -> &[f32] {
        &self.data[query * self.n..(query + 1) * self.n]
    }

    pub fn row_mut(&mut self, query: usize) -> &mut [f32] {
        &mut self.data[query * self.n..(query + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }
}

/// Attention of one layer. `positions[i]` is the original sequence index of
/// local row/column `i`; it is the identity unless tokens were pruned below
/// this layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    pub positions: Vec<usize>,
    pub spans: Spans,
    pub heads: Vec<AttentionMatrix>,
}

impl LayerTrace {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Head-averaged attention matrix.
    pub fn mean_over_heads(&self) -> AttentionMatrix {
        let n = self.len();
        let mut out = vec![0.0f32; n * n];
        for h in &self.heads {
            for (o, v) in out.iter_mut().zip(h.as_slice()) {
                *o += v;
            }
        }
        let inv = 1.0 / self.heads.len() as f32;
        for o in &mut out {
            *o *= inv;
        }
        AttentionMatrix::from_rows(n, out)
    }
}

/// Per-layer, per-head attention captured during prefill.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTrace {
    pub spans: Spans,
    pub layers: Vec<LayerTrace>,
    /// Visual-encoder attention from the summary token to each visual token.
    pub cls_attention: Option<Vec<f32>>,
}

impl AttentionTrace {
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn num_heads(&self) -> usize {
        self.layers.first().map_or(0, |l| l.heads.len())
    }

    pub fn layer(&self, i: usize) -> &LayerTrace {
        &self.layers[i]
    }

    pub fn seq_len(&self) -> usize {
        self.spans.len()
    }
}
