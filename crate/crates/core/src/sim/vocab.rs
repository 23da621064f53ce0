//! Shared token vocabulary.
//!
//! Input and output codes depend only on `(vocab_size, hidden)`, never on a
//! model seed, so task generators and models built with different seeds
//! agree on what every token id looks like.
//!
//! Answers travel through two low-dimensional subspaces orthogonal to the
//! query and key directions: retrievable tokens carry an answer-in code, the
//! readout scores answer-out codes, and both use the same coefficients so a
//! copy from one basis to the other carries the token identity. Ordinary
//! input codes are kept out of both subspaces.

use crate::rng;

pub const QUERY: u32 = 0;
pub const VISUAL_PATCH: u32 = 1;
pub const MARK: u32 = 2;
pub const COUNT_BASE: u32 = 3;
pub const MAX_COUNT: u32 = 16;
/// First id usable as a text word or needle answer.
pub const FIRST_WORD: u32 = COUNT_BASE + MAX_COUNT + 1;
pub const MIN_VOCAB: usize = 64;

/// Gain on the query direction carried by every text token.
pub const QUERY_GAIN: f32 = 1.0;
/// Gain on the key direction carried by retrievable tokens.
pub const KEY_GAIN: f32 = 2.0;

const VOCAB_SEED: u64 = 0x5EED_C0DE_0000_0001;

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    size: usize,
    hidden: usize,
    input_codes: Vec<f32>,
    output_codes: Vec<f32>,
    query_dir: Vec<f32>,
    key_dir: Vec<f32>,
    /// Orthonormal rows spanning the answer-in subspace, `answer_dim x hidden`.
    answer_in: Vec<f32>,
    /// Orthonormal rows spanning the answer-out subspace.
    answer_out: Vec<f32>,
    answer_codes: Vec<f32>,
}

/// Dimension of the answer subspace for a residual width.
pub fn answer_dim(hidden: usize) -> usize {
    (hidden / 4).max(1)
}

impl Vocabulary {
    pub fn new(size: usize, hidden: usize) -> Self {
        let k = answer_dim(hidden);
        assert!(hidden >= 2 * k + 2, "hidden width {hidden} too small");
        let mut r = rng::stream(VOCAB_SEED ^ 0x0F0F, hidden as u64);
        let mut dirs: Vec<Vec<f32>> = (0..2 * k + 2).map(|_| rng::normal_vec(&mut r, hidden, 1.0)).collect();
        for i in 0..dirs.len() {
            for j in 0..i {
                let p = dot(&dirs[i], &dirs[j]);
                let (head, tail) = dirs.split_at_mut(i);
                for (a, b) in tail[0].iter_mut().zip(&head[j]) {
                    *a -= p * b;
                }
            }
            normalize(&mut dirs[i]);
        }
        let query_dir = dirs[0].clone();
        let key_dir = dirs[1].clone();
        let answer_in: Vec<f32> = dirs[2..2 + k].concat();
        let answer_out: Vec<f32> = dirs[2 + k..].concat();

        let mut r = rng::stream(VOCAB_SEED, hidden as u64);
        let mut input_codes = rng::normal_vec(&mut r, size * hidden, 1.0);
        for code in input_codes.chunks_exact_mut(hidden) {
            strip(code, &answer_in, hidden);
            strip(code, &answer_out, hidden);
        }

        let mut r = rng::stream(VOCAB_SEED ^ 0xA5A5, hidden as u64);
        let mut answer_codes = Vec::with_capacity(size * k);
        for _ in 0..size {
            let mut coef = rng::normal_vec(&mut r, k, 1.0);
            normalize(&mut coef);
            answer_codes.extend(coef);
        }
        let output_codes = expand(&answer_codes, &answer_out, hidden);
        Self {
            size,
            hidden,
            input_codes,
            output_codes,
            query_dir,
            key_dir,
            answer_in,
            answer_out,
            answer_codes,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// Input-side code of a token (what the model reads).
    pub fn input_code(&self, id: u32) -> &[f32] {
        let i = id as usize;
        &self.input_codes[i * self.hidden..(i + 1) * self.hidden]
    }

    /// Output-side code of a token (what the readout scores against).
    pub fn output_code(&self, id: u32) -> &[f32] {
        let i = id as usize;
        &self.output_codes[i * self.hidden..(i + 1) * self.hidden]
    }

    /// Unit vector carried by text tokens on the query side.
    pub fn query_dir(&self) -> &[f32] {
        &self.query_dir
    }

    /// Unit vector carried by retrievable tokens on the key side.
    pub fn key_dir(&self) -> &[f32] {
        &self.key_dir
    }

    pub fn answer_dim(&self) -> usize {
        self.answer_in.len() / self.hidden
    }

    /// Row `i` of the answer-in basis.
    pub fn answer_in_axis(&self, i: usize) -> &[f32] {
        &self.answer_in[i * self.hidden..(i + 1) * self.hidden]
    }

    /// Row `i` of the answer-out basis.
    pub fn answer_out_axis(&self, i: usize) -> &[f32] {
        &self.answer_out[i * self.hidden..(i + 1) * self.hidden]
    }

    /// Answer-in code of a token, norm `sqrt(hidden)`.
    pub fn answer_in_code(&self, id: u32) -> Vec<f32> {
        let k = self.answer_dim();
        let i = id as usize;
        expand(&self.answer_codes[i * k..(i + 1) * k], &self.answer_in, self.hidden)
    }

    /// Removes the answer-out component of `v` in place.
    pub fn strip_answer_out(&self, v: &mut [f32]) {
        strip(v, &self.answer_out, self.hidden);
    }

    /// Removes both answer-subspace components of `v` in place.
    pub fn strip_answer(&self, v: &mut [f32]) {
        strip(v, &self.answer_in, self.hidden);
        strip(v, &self.answer_out, self.hidden);
    }

    /// Removes every planted direction (query, key and both answer
    /// subspaces) from `v` in place.
    pub fn strip_planted(&self, v: &mut [f32]) {
        self.strip_answer(v);
        for dir in [&self.query_dir, &self.key_dir] {
            let p = dot(v, dir);
            for (x, d) in v.iter_mut().zip(dir) {
                *x -= p * d;
            }
        }
    }

    /// Embedding of an ordinary text token.
    pub fn text_embedding(&self, id: u32) -> Vec<f32> {
        let scale = QUERY_GAIN * (self.hidden as f32).sqrt();
        self.input_code(id)
            .iter()
            .zip(&self.query_dir)
            .map(|(c, q)| c + scale * q)
            .collect()
    }

    /// Embedding of a token whose content should be retrievable: its
    /// answer-in code plus the key direction.
    pub fn retrievable_embedding(&self, id: u32, base: &[f32]) -> Vec<f32> {
        let scale = KEY_GAIN * (self.hidden as f32).sqrt();
        base.iter()
            .zip(self.answer_in_code(id))
            .zip(&self.key_dir)
            .map(|((b, o), k)| b + o + scale * k)
            .collect()
    }

    pub fn count_token(n: u32) -> Option<u32> {
        (n <= MAX_COUNT).then_some(COUNT_BASE + n)
    }

    pub fn count_of(id: u32) -> Option<u32> {
        (COUNT_BASE..=COUNT_BASE + MAX_COUNT)
            .contains(&id)
            .then(|| id - COUNT_BASE)
    }
}

/// Dot product with eight independent accumulators so it vectorizes; the
/// summation order is fixed, so results are deterministic.
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut tail = 0.0f32;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `sqrt(hidden) * sum_c coef_c basis_c` for each coefficient row.
fn expand(coefs: &[f32], basis: &[f32], hidden: usize) -> Vec<f32> {
    let k = basis.len() / hidden;
    let norm = (hidden as f32).sqrt();
    let mut out = vec![0.0f32; coefs.len() / k * hidden];
    for (row, coef) in out.chunks_exact_mut(hidden).zip(coefs.chunks_exact(k)) {
        for (c, b) in coef.iter().zip(basis.chunks_exact(hidden)) {
            for (o, bv) in row.iter_mut().zip(b) {
                *o += norm * c * bv;
            }
        }
    }
    out
}

fn strip(v: &mut [f32], basis: &[f32], hidden: usize) {
    for b in basis.chunks_exact(hidden) {
        let p = dot(v, b);
        for (x, bv) in v.iter_mut().zip(b) {
            *x -= p * bv;
        }
    }
}

fn normalize(v: &mut [f32]) {
    let n = dot(v, v).sqrt();
    for x in v.iter_mut() {
        *x /= n;
    }
}
