//! Deterministic toy multimodal transformer.
//!
//! Pre-norm decoder blocks (causal multi-head attention + GELU MLP) over a
//! residual stream of width `num_heads * head_dim`. No positional encoding is
//! used, so pruned or evicted tokens leave no positional holes behind.
//!
//! All projections are seeded Gaussian with `1/sqrt(fan_in)` scaling. On top
//! of that noise every block carries a small planted retrieval circuit: text
//! queries project onto the same head direction as tokens carrying the
//! vocabulary key direction, and the value/output paths together copy the
//! residual stream. Retrieval tasks are therefore solvable by an untrained
//! model, and their accuracy depends on whether the retrievable token
//! survives compression.

use super::cache::{HeadCache, KVCacheState, LayerCache};
use super::config::ModelConfig;
use super::sequence::{Spans, TokenSequence};
use super::trace::{AttentionMatrix, AttentionTrace, LayerTrace};
use super::vocab::{dot, Vocabulary};
use crate::error::{Error, Result};
use crate::rng;

const STRONG_RETRIEVAL: f32 = 1.0;
const WEAK_RETRIEVAL: f32 = 0.25;
const VALUE_COPY: f32 = 2.0;
const MLP_GAIN: f32 = 0.5;
const CLS_SALIENCE: f32 = 0.25;
const NOISE: f32 = 0.3;

/// Dense row-major projection `y = W x` with `W: [out_dim x in_dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub out_dim: usize,
    pub in_dim: usize,
    pub weight: Vec<f32>,
}

impl Linear {
    pub fn new(out_dim: usize, in_dim: usize, weight: Vec<f32>) -> Self {
        assert_eq!(weight.len(), out_dim * in_dim);
        Self {
            out_dim,
            in_dim,
            weight,
        }
    }

    pub fn matvec(&self, x: &[f32]) -> Vec<f32> {
        debug_assert_eq!(x.len(), self.in_dim);
        self.weight
            .chunks_exact(self.in_dim)
            .map(|row| dot(row, x))
            .collect()
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.weight[r * self.in_dim..(r + 1) * self.in_dim]
    }

    fn checksum(&self) -> u64 {
        self.weight
            .iter()
            .fold(0u64, |acc, w| rng::mix(acc ^ u64::from(w.to_bits())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub w_up: Linear,
    pub w_down: Linear,
}

/// Names of the projections inside each block, in storage order.
pub const PROJECTIONS: [&str; 6] = ["wq", "wk", "wv", "wo", "w_up", "w_down"];

impl Block {
    pub fn get(&self, name: &str) -> Option<&Linear> {
        Some(match name {
            "wq" => &self.wq,
            "wk" => &self.wk,
            "wv" => &self.wv,
            "wo" => &self.wo,
            "w_up" => &self.w_up,
            "w_down" => &self.w_down,
            _ => return None,
        })
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Linear> {
        Some(match name {
            "wq" => &mut self.wq,
            "wk" => &mut self.wk,
            "wv" => &mut self.wv,
            "wo" => &mut self.wo,
            "w_up" => &mut self.w_up,
            "w_down" => &mut self.w_down,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    vocab: Vocabulary,
    blocks: Vec<Block>,
    cls_probe: Vec<f32>,
    /// Multiplier on each block's contribution to the residual stream.
    layer_gain: Vec<f32>,
}

/// Output of a prefill pass.
#[derive(Debug, Clone)]
pub struct Prefill {
    pub trace: AttentionTrace,
    pub cache: KVCacheState,
    pub logits: Vec<f32>,
}

/// Greedy decode output plus analytic attention cost counters.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct GenerationResult {
    pub output: Vec<u32>,
    /// Multiply-accumulates of prefill attention (QK^T and AV).
    pub prefill_attention_ops: u64,
    /// Extra prefill cost of recomputing attention scores for KV selection.
    pub selection_ops: u64,
    /// Multiply-accumulates of decode queries against prefill cache rows.
    pub decode_attention_ops: u64,
    /// Multiply-accumulates of decode queries against rows written during decode.
    pub decode_generated_ops: u64,
    pub retained_cache_entries: usize,
}

impl GenerationResult {
    pub fn ttft_ops(&self) -> u64 {
        self.prefill_attention_ops + self.selection_ops
    }

    pub fn decode_ops(&self) -> u64 {
        self.decode_attention_ops + self.decode_generated_ops
    }

    pub fn total_ops(&self) -> u64 {
        self.ttft_ops() + self.decode_ops()
    }
}

/// Token-pruning hook invoked between prefill layers.
///
/// Before layer `layer` runs, `select` receives the attention of layer
/// `layer - 1` and returns the local indices of tokens that continue.
pub struct PruneHook<'a> {
    pub layer: usize,
    pub select: &'a mut dyn FnMut(&LayerTrace) -> Result<Vec<usize>>,
}

/// Prefill attention cost of a layer holding `n` tokens.
pub fn layer_attention_ops(n: usize, num_heads: usize, head_dim: usize) -> u64 {
    let n = n as u64;
    // each query i reads i+1 keys for QK^T and i+1 values for AV
    (num_heads * head_dim) as u64 * n * (n + 1)
}

impl Model {
    pub fn build(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let d = config.hidden();
        let dh = config.head_dim;
        let h = config.num_heads;
        let f = config.mlp_hidden();
        let vocab = Vocabulary::new(config.vocab_size, d);
        let inv = |n: usize| NOISE / (n as f32).sqrt();

        let mut blocks = Vec::with_capacity(config.num_layers);
        for layer in 0..config.num_layers {
            let tag = |k: u64| (layer as u64) << 8 | k;
            let mut r = rng::stream(config.seed, tag(1));
            let mut wq = rng::normal_vec(&mut r, d * d, inv(d));
            let mut wk = rng::normal_vec(&mut r, d * d, inv(d));
            let mut wv = rng::normal_vec(&mut r, d * d, inv(d));
            let mut wo = rng::normal_vec(&mut r, d * d, inv(d));
            let w_up = rng::normal_vec(&mut r, f * d, inv(d));
            let w_down = rng::normal_vec(&mut r, d * f, inv(f));

            let mut r = rng::stream(config.seed, tag(2));
            for head in 0..h {
                let coin = rng::normal_f64(&mut r) > 0.0;
                let strong = layer >= config.num_layers / 2 && (head == layer % h || coin);
                let gain = if strong { STRONG_RETRIEVAL } else { WEAK_RETRIEVAL };
                let mut u = rng::normal_vec(&mut r, dh, 1.0);
                let norm = dot(&u, &u).sqrt();
                u.iter_mut().for_each(|x| *x /= norm);
                for (c, uc) in u.iter().enumerate() {
                    let row = (head * dh + c) * d;
                    for j in 0..d {
                        wq[row + j] += gain * uc * vocab.query_dir()[j];
                        wk[row + j] += gain * uc * vocab.key_dir()[j];
                    }
                }
            }
            // only the planted circuit writes the planted directions; the copy
            // reads answer-in but writes answer-out, so copied answers are
            // never re-copied out of other tokens' cache rows
            let k = vocab.answer_dim();
            let mut w_down = w_down;
            project_out_rows(&mut wo, d, d, &vocab);
            project_out_rows(&mut w_down, d, f, &vocab);
            for head in 0..h {
                for c in 0..dh.min(k) {
                    let (src, dst) = (vocab.answer_in_axis(c), vocab.answer_out_axis(c));
                    let col = head * dh + c;
                    for j in 0..d {
                        wv[col * d + j] = VALUE_COPY * src[j];
                        wo[j * d + col] += dst[j];
                    }
                }
            }
            blocks.push(Block {
                wq: Linear::new(d, d, wq),
                wk: Linear::new(d, d, wk),
                wv: Linear::new(d, d, wv),
                wo: Linear::new(d, d, wo),
                w_up: Linear::new(f, d, w_up),
                w_down: Linear::new(d, f, w_down),
            });
        }

        let mut r = rng::stream(config.seed, 0xC15);
        let scale = CLS_SALIENCE * (d as f32).sqrt();
        let cls_probe = rng::normal_vec(&mut r, d, 1.0)
            .into_iter()
            .zip(vocab.key_dir())
            .map(|(g, k)| g + scale * k)
            .collect();

        Ok(Self {
            layer_gain: vec![1.0; config.num_layers],
            config,
            vocab,
            blocks,
            cls_probe,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [Block] {
        &mut self.blocks
    }

    pub fn layer_gain(&self) -> &[f32] {
        &self.layer_gain
    }

    pub fn set_layer_gain(&mut self, layer: usize, gain: f32) {
        self.layer_gain[layer] = gain;
    }

    /// All weights of block `layer`, projections concatenated in
    /// [`PROJECTIONS`] order.
    pub fn block_params(&self, layer: usize) -> Vec<f32> {
        let b = &self.blocks[layer];
        PROJECTIONS
            .iter()
            .flat_map(|p| b.get(p).expect("known projection").weight.iter().copied())
            .collect()
    }

    /// Inverse of [`Model::block_params`].
    pub fn set_block_params(&mut self, layer: usize, params: &[f32]) {
        let b = &mut self.blocks[layer];
        let mut at = 0;
        for p in PROJECTIONS {
            let w = &mut b.get_mut(p).expect("known projection").weight;
            let n = w.len();
            w.copy_from_slice(&params[at..at + n]);
            at += n;
        }
        assert_eq!(at, params.len(), "parameter count mismatch");
    }

    /// Order-sensitive hash over every weight.
    pub fn weight_checksum(&self) -> u64 {
        let mut acc = 0u64;
        for b in &self.blocks {
            for name in PROJECTIONS {
                acc = rng::mix(acc ^ b.get(name).expect("known projection").checksum());
            }
        }
        self.cls_probe
            .iter()
            .fold(acc, |a, w| rng::mix(a ^ u64::from(w.to_bits())))
    }

    fn check_shape(&self, seq: &TokenSequence) -> Result<()> {
        if seq.len() > self.config.max_seq_len {
            return Err(Error::SequenceTooLong {
                len: seq.len(),
                max: self.config.max_seq_len,
            });
        }
        if seq.hidden() != self.config.hidden() {
            return Err(Error::ShapeMismatch(format!(
                "sequence hidden {} != model hidden {}",
                seq.hidden(),
                self.config.hidden()
            )));
        }
        Ok(())
    }

    /// Synthetic visual-encoder stage: attention of a summary probe over the
    /// visual tokens. `None` when the sequence has no visual tokens.
    pub fn visual_encoder_attention(&self, seq: &TokenSequence) -> Option<Vec<f32>> {
        let l_v = seq.spans().visual;
        if l_v == 0 {
            return None;
        }
        let scale = 1.0 / (self.config.hidden() as f32).sqrt();
        let scores: Vec<f32> = seq.embeddings()[..l_v]
            .iter()
            .map(|e| dot(&self.cls_probe, e) * scale)
            .collect();
        Some(softmax(&scores))
    }

    pub fn prefill(&self, seq: &TokenSequence) -> Result<Prefill> {
        self.prefill_with(seq, None)
    }

    pub fn prefill_with(&self, seq: &TokenSequence, mut hook: Option<PruneHook<'_>>) -> Result<Prefill> {
        self.check_shape(seq)?;
        let cfg = &self.config;
        let (dh, nh) = (cfg.head_dim, cfg.num_heads);
        if let Some(hk) = &hook {
            if hk.layer == 0 || hk.layer >= cfg.num_layers {
                return Err(Error::Config(format!(
                    "pruning layer must be in [1, {}), got {}",
                    cfg.num_layers, hk.layer
                )));
            }
        }

        let mut x: Vec<Vec<f32>> = seq.embeddings().to_vec();
        let mut positions: Vec<usize> = (0..seq.len()).collect();
        let mut spans = seq.spans();
        let mut layers = Vec::with_capacity(cfg.num_layers);
        let mut caches = Vec::with_capacity(cfg.num_layers);
        let mut ops = 0u64;

        for (li, block) in self.blocks.iter().enumerate() {
            if let Some(hk) = hook.as_mut() {
                if hk.layer == li {
                    let prev: &LayerTrace = layers.last().expect("hook layer >= 1");
                    let mut keep = (hk.select)(prev)?;
                    keep.sort_unstable();
                    keep.dedup();
                    if keep.iter().any(|&k| k >= x.len()) {
                        return Err(Error::ShapeMismatch("pruning index out of range".into()));
                    }
                    let visual = keep.iter().filter(|&&k| k < spans.visual).count();
                    if keep.len() - visual != spans.text {
                        return Err(Error::Config("text tokens must never be pruned".into()));
                    }
                    x = keep.iter().map(|&k| std::mem::take(&mut x[k])).collect();
                    positions = keep.iter().map(|&k| positions[k]).collect();
                    spans = Spans::new(visual, spans.text);
                }
            }

            let n = x.len();
            let normed: Vec<Vec<f32>> = x.iter().map(|v| rms_norm(v)).collect();
            let q: Vec<Vec<f32>> = normed.iter().map(|v| block.wq.matvec(v)).collect();
            let k: Vec<Vec<f32>> = normed.iter().map(|v| block.wk.matvec(v)).collect();
            let v: Vec<Vec<f32>> = normed.iter().map(|v| block.wv.matvec(v)).collect();

            let mut heads = Vec::with_capacity(nh);
            let mut head_out = vec![vec![0.0f32; cfg.hidden()]; n];
            let mut layer_cache = LayerCache { heads: Vec::with_capacity(nh) };
            let mut probs = Vec::with_capacity(n);
            for h in 0..nh {
                let sl = h * dh..(h + 1) * dh;
                let mut att = AttentionMatrix::zeros(n);
                for i in 0..n {
                    attention_probs(&q[i][sl.clone()], |j| &k[j][sl.clone()], i + 1, &mut probs);
                    att.row_mut(i)[..=i].copy_from_slice(&probs);
                    weighted_sum(&probs, |j| &v[j][sl.clone()], &mut head_out[i][sl.clone()]);
                }
                heads.push(att);
                let mut hc = HeadCache::new(dh);
                hc.positions = positions.clone();
                for j in 0..n {
                    hc.push(&k[j][sl.clone()], &v[j][sl.clone()]);
                }
                layer_cache.heads.push(hc);
            }
            ops += layer_attention_ops(n, nh, dh);

            let gain = self.layer_gain[li];
            for (xi, oi) in x.iter_mut().zip(&head_out) {
                self.block_residual(block, gain, xi, oi);
            }
            layers.push(LayerTrace {
                positions: positions.clone(),
                spans,
                heads,
            });
            caches.push(layer_cache);
        }

        let logits = self.readout(x.last().expect("text span non-empty"));
        let next_token = argmax(&logits);
        Ok(Prefill {
            trace: AttentionTrace {
                spans: seq.spans(),
                layers,
                cls_attention: self.visual_encoder_attention(seq),
            },
            cache: KVCacheState {
                spans: seq.spans(),
                layers: caches,
                next_token,
                prefill_attention_ops: ops,
                selection_ops: 0,
            },
            logits,
        })
    }

    /// Attention output projection, residual add and MLP for one token.
    fn block_residual(&self, block: &Block, gain: f32, x: &mut [f32], head_out: &[f32]) {
        let attn = block.wo.matvec(head_out);
        for (a, b) in x.iter_mut().zip(&attn) {
            *a += gain * b;
        }
        let up = block.w_up.matvec(&rms_norm(x));
        let act: Vec<f32> = up.into_iter().map(gelu).collect();
        let down = block.w_down.matvec(&act);
        for (a, b) in x.iter_mut().zip(&down) {
            *a += gain * MLP_GAIN * b;
        }
    }

    pub fn readout(&self, x: &[f32]) -> Vec<f32> {
        let normed = rms_norm(x);
        let scale = 1.0 / (self.config.hidden() as f32).sqrt();
        (0..self.config.vocab_size as u32)
            .map(|id| dot(self.vocab.output_code(id), &normed) * scale)
            .collect()
    }

    /// Greedy decoding of `steps` tokens against `cache`. No compression is
    /// applied while decoding; rows for generated tokens are appended.
    pub fn decode(&self, cache: &mut KVCacheState, steps: usize) -> Result<GenerationResult> {
        let cfg = &self.config;
        let (dh, nh) = (cfg.head_dim, cfg.num_heads);
        if cache.layers.len() != cfg.num_layers
            || cache.layers.iter().any(|l| {
                l.heads.len() != nh || l.heads.iter().any(|h| h.head_dim != dh)
            })
        {
            return Err(Error::ShapeMismatch("cache does not match model shape".into()));
        }
        let mut output = Vec::with_capacity(steps);
        let mut decode_ops = 0u64;
        let mut generated_ops = 0u64;
        let mut probs = Vec::new();
        let retained = cache.retained_entries();
        for _ in 0..steps {
            let mut x = self.vocab.text_embedding(cache.next_token);
            for (li, block) in self.blocks.iter().enumerate() {
                let normed = rms_norm(&x);
                let q = block.wq.matvec(&normed);
                let k = block.wk.matvec(&normed);
                let v = block.wv.matvec(&normed);
                let mut head_out = vec![0.0f32; cfg.hidden()];
                for (h, hc) in cache.layers[li].heads.iter_mut().enumerate() {
                    let sl = h * dh..(h + 1) * dh;
                    hc.push(&k[sl.clone()], &v[sl.clone()]);
                    hc.generated += 1;
                    let rows = hc.rows();
                    attention_probs(&q[sl.clone()], |j| hc.key(j), rows, &mut probs);
                    weighted_sum(&probs, |j| hc.value(j), &mut head_out[sl]);
                    decode_ops += 2 * (dh * hc.prefill_rows()) as u64;
                    generated_ops += 2 * (dh * hc.generated) as u64;
                }
                self.block_residual(block, self.layer_gain[li], &mut x, &head_out);
            }
            let next = argmax(&self.readout(&x));
            output.push(next);
            cache.next_token = next;
        }
        Ok(GenerationResult {
            output,
            prefill_attention_ops: cache.prefill_attention_ops,
            selection_ops: cache.selection_ops,
            decode_attention_ops: decode_ops,
            decode_generated_ops: generated_ops,
            retained_cache_entries: retained,
        })
    }

    /// Logits at the last position of a full recomputation, with no cache.
    pub fn forward_logits(&self, embeddings: &[Vec<f32>]) -> Vec<f32> {
        let cfg = &self.config;
        let (dh, nh) = (cfg.head_dim, cfg.num_heads);
        let mut x = embeddings.to_vec();
        let mut probs = Vec::new();
        for (li, block) in self.blocks.iter().enumerate() {
            let normed: Vec<Vec<f32>> = x.iter().map(|v| rms_norm(v)).collect();
            let q: Vec<Vec<f32>> = normed.iter().map(|v| block.wq.matvec(v)).collect();
            let k: Vec<Vec<f32>> = normed.iter().map(|v| block.wk.matvec(v)).collect();
            let v: Vec<Vec<f32>> = normed.iter().map(|v| block.wv.matvec(v)).collect();
            let mut outs = vec![vec![0.0f32; cfg.hidden()]; x.len()];
            for (i, out) in outs.iter_mut().enumerate() {
                for h in 0..nh {
                    let sl = h * dh..(h + 1) * dh;
                    attention_probs(&q[i][sl.clone()], |j| &k[j][sl.clone()], i + 1, &mut probs);
                    weighted_sum(&probs, |j| &v[j][sl.clone()], &mut out[h * dh..(h + 1) * dh]);
                }
            }
            for (xi, oi) in x.iter_mut().zip(&outs) {
                self.block_residual(block, self.layer_gain[li], xi, oi);
            }
        }
        self.readout(x.last().expect("non-empty"))
    }

    /// Full forward pass that reports the input of every projection at every
    /// position: `visit(layer, position, projection, input)`.
    pub fn record_inputs(&self, embeddings: &[Vec<f32>], mut visit: impl FnMut(usize, usize, &str, &[f32])) {
        let cfg = &self.config;
        let (dh, nh) = (cfg.head_dim, cfg.num_heads);
        let mut x = embeddings.to_vec();
        let mut probs = Vec::new();
        for (li, block) in self.blocks.iter().enumerate() {
            let normed: Vec<Vec<f32>> = x.iter().map(|v| rms_norm(v)).collect();
            for (i, v) in normed.iter().enumerate() {
                for p in ["wq", "wk", "wv"] {
                    visit(li, i, p, v);
                }
            }
            let q: Vec<Vec<f32>> = normed.iter().map(|v| block.wq.matvec(v)).collect();
            let k: Vec<Vec<f32>> = normed.iter().map(|v| block.wk.matvec(v)).collect();
            let v: Vec<Vec<f32>> = normed.iter().map(|v| block.wv.matvec(v)).collect();
            let gain = self.layer_gain[li];
            for (i, xi) in x.iter_mut().enumerate() {
                let mut out = vec![0.0f32; cfg.hidden()];
                for h in 0..nh {
                    let sl = h * dh..(h + 1) * dh;
                    attention_probs(&q[i][sl.clone()], |j| &k[j][sl.clone()], i + 1, &mut probs);
                    weighted_sum(&probs, |j| &v[j][sl.clone()], &mut out[h * dh..(h + 1) * dh]);
                }
                visit(li, i, "wo", &out);
                let attn = block.wo.matvec(&out);
                for (a, b) in xi.iter_mut().zip(&attn) {
                    *a += gain * b;
                }
                let n2 = rms_norm(xi);
                visit(li, i, "w_up", &n2);
                let act: Vec<f32> = block.w_up.matvec(&n2).into_iter().map(gelu).collect();
                visit(li, i, "w_down", &act);
                let down = block.w_down.matvec(&act);
                for (a, b) in xi.iter_mut().zip(&down) {
                    *a += gain * MLP_GAIN * b;
                }
            }
        }
    }

    /// Greedy generation by full recomputation at every step. Returns the
    /// tokens produced after the prefill token, matching [`Model::decode`].
    pub fn generate_uncached(&self, seq: &TokenSequence, steps: usize) -> Vec<u32> {
        let mut emb = seq.embeddings().to_vec();
        let mut next = argmax(&self.forward_logits(&emb));
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            emb.push(self.vocab.text_embedding(next));
            next = argmax(&self.forward_logits(&emb));
            out.push(next);
        }
        out
    }

    /// Mean next-token cross-entropy of `target` given `seq`.
    pub fn answer_loss(&self, seq: &TokenSequence, target: u32) -> f64 {
        let logits = self.forward_logits(seq.embeddings());
        cross_entropy(&logits, target)
    }
}

pub fn cross_entropy(logits: &[f32], target: u32) -> f64 {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    let lse = logits.iter().map(|&z| (z as f64 - max).exp()).sum::<f64>().ln() + max;
    lse - logits[target as usize] as f64
}

/// Removes every planted direction from each column of the `rows x cols`
/// output projection `w`.
fn project_out_rows(w: &mut [f32], rows: usize, cols: usize, vocab: &Vocabulary) {
    let mut col = vec![0.0f32; rows];
    for c in 0..cols {
        for (r, v) in col.iter_mut().enumerate() {
            *v = w[r * cols + c];
        }
        vocab.strip_planted(&mut col);
        for (r, v) in col.iter().enumerate() {
            w[r * cols + c] = *v;
        }
    }
}

pub fn rms_norm(x: &[f32]) -> Vec<f32> {
    let ms = x.iter().map(|v| v * v).sum::<f32>() / x.len() as f32;
    let inv = 1.0 / (ms + 1e-6).sqrt();
    x.iter().map(|v| v * inv).collect()
}

fn gelu(x: f32) -> f32 {
    0.5 * x * (1.0 + (0.797_884_6 * (x + 0.044_715 * x * x * x)).tanh())
}

pub fn softmax(scores: &[f32]) -> Vec<f32> {
    let max = scores.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut out: Vec<f32> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f32 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    out
}

/// Softmax over `n` keys of scaled dot products with `q`.
fn attention_probs<'a>(q: &[f32], key: impl Fn(usize) -> &'a [f32], n: usize, probs: &mut Vec<f32>) {
    let scale = 1.0 / (q.len() as f32).sqrt();
    probs.clear();
    probs.extend((0..n).map(|j| dot(q, key(j)) * scale));
    let max = probs.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0f32;
    for p in probs.iter_mut() {
        *p = (*p - max).exp();
        sum += *p;
    }
    for p in probs.iter_mut() {
        *p /= sum;
    }
}

fn weighted_sum<'a>(probs: &[f32], value: impl Fn(usize) -> &'a [f32], out: &mut [f32]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (j, &p) in probs.iter().enumerate() {
        for (o, v) in out.iter_mut().zip(value(j)) {
            *o += p * v;
        }
    }
}

/// Index of the largest value; lowest index wins ties.
pub fn argmax(xs: &[f32]) -> u32 {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best as u32
}
