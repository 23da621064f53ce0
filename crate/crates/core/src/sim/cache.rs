use super::sequence::Spans;

/// Cached keys and values of one attention head.
///
/// Rows are laid out as `[retained prefill rows | appended centroids | decode rows]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadCache {
    pub head_dim: usize,
    /// Original token index of each retained prefill row, strictly increasing.
    pub positions: Vec<usize>,
    pub keys: Vec<f32>,
    pub values: Vec<f32>,
    pub centroids: usize,
    pub generated: usize,
}

impl HeadCache {
    pub fn new(head_dim: usize) -> Self {
        Self {
            head_dim,
            positions: Vec::new(),
            keys: Vec::new(),
            values: Vec::new(),
            centroids: 0,
            generated: 0,
        }
    }

    pub fn rows(&self) -> usize {
        self.keys.len() / self.head_dim
    }

    /// Rows that came out of prefill (retained tokens plus centroids).
    pub fn prefill_rows(&self) -> usize {
        self.positions.len() + self.centroids
    }

    pub fn key(&self, row: usize) -> &[f32] {
        &self.keys[row * self.head_dim..(row + 1) * self.head_dim]
    }

    pub fn value(&self, row: usize) -> &[f32] {
        &self.values[row * self.head_dim..(row + 1) * self.head_dim]
    }

    pub fn key_mut(&mut self, row: usize) -> &mut [f32] {
        &mut self.keys[row * self.head_dim..(row + 1) * self.head_dim]
    }

    pub fn value_mut(&mut self, row: usize) -> &mut [f32] {
        &mut self.values[row * self.head_dim..(row + 1) * self.head_dim]
    }

    pub fn push(&mut self, key: &[f32], value: &[f32]) {
        self.keys.extend_from_slice(key);
        self.values.extend_from_slice(value);
    }

    /// Keeps only the prefill rows whose local index is in `rows` (sorted).
    pub fn retain_rows(&mut self, rows: &[usize]) {
        debug_assert_eq!(self.centroids + self.generated, 0);
        let d = self.head_dim;
        let mut keys = Vec::with_capacity(rows.len() * d);
        let mut values = Vec::with_capacity(rows.len() * d);
        let mut positions = Vec::with_capacity(rows.len());
        for &r in rows {
            keys.extend_from_slice(self.key(r));
            values.extend_from_slice(self.value(r));
            positions.push(self.positions[r]);
        }
        self.keys = keys;
        self.values = values;
        self.positions = positions;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerCache {
    pub heads: Vec<HeadCache>,
}

impl LayerCache {
    pub fn prefill_rows(&self) -> usize {
        self.heads.iter().map(HeadCache::prefill_rows).sum()
    }
}

/// Per-layer, per-head KV cache left behind by prefill.
#[derive(Debug, Clone, PartialEq)]
pub struct KVCacheState {
    pub spans: Spans,
    pub layers: Vec<LayerCache>,
    /// Greedy token produced by the prefill logits; fed at the first decode step.
    pub next_token: u32,
    /// Prefill attention cost that produced this cache.
    pub prefill_attention_ops: u64,
    /// Score-recomputation surcharge charged by a KV selection policy.
    pub selection_ops: u64,
}

impl KVCacheState {
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn seq_len(&self) -> usize {
        self.spans.len()
    }

    /// Total retained prefill rows over all layers and heads.
    pub fn retained_entries(&self) -> usize {
        self.layers.iter().map(LayerCache::prefill_rows).sum()
    }

    /// Prefill rows per layer, summed over heads.
    pub fn per_layer_entries(&self) -> Vec<usize> {
        self.layers.iter().map(LayerCache::prefill_rows).collect()
    }

    pub fn is_consistent(&self) -> bool {
        let l = self.seq_len();
        self.layers.iter().all(|layer| {
            layer.heads.iter().all(|h| {
                h.positions.windows(2).all(|w| w[0] < w[1])
                    && h.positions.iter().all(|&p| p < l)
                    && h.keys.len() == h.values.len()
                    && h.rows() == h.prefill_rows() + h.generated
            })
        })
    }
}
