use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Visual,
    Text,
}

/// Visual block `[0, visual)` followed by text block `[visual, visual + text)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Spans {
    pub visual: usize,
    pub text: usize,
}

impl Spans {
    pub fn new(visual: usize, text: usize) -> Self {
        Self { visual, text }
    }

    pub fn len(&self) -> usize {
        self.visual + self.text
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn modality(&self, index: usize) -> Modality {
        if index < self.visual {
            Modality::Visual
        } else {
            Modality::Text
        }
    }
}

/// Ordered multimodal prompt: all visual tokens precede all text tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence {
    tokens: Vec<u32>,
    embeddings: Vec<Vec<f32>>,
    spans: Spans,
}

impl TokenSequence {
    pub fn new(tokens: Vec<u32>, embeddings: Vec<Vec<f32>>, spans: Spans) -> Result<Self> {
        if tokens.len() != embeddings.len() || tokens.len() != spans.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} tokens, {} embeddings, spans cover {}",
                tokens.len(),
                embeddings.len(),
                spans.len()
            )));
        }
        if spans.text == 0 {
            return Err(Error::EmptyTextSpan);
        }
        if let Some(first) = embeddings.first() {
            if embeddings.iter().any(|e| e.len() != first.len()) {
                return Err(Error::ShapeMismatch("ragged embeddings".into()));
            }
        }
        Ok(Self {
            tokens,
            embeddings,
            spans,
        })
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    pub fn embeddings(&self) -> &[Vec<f32>] {
        &self.embeddings
    }

    pub fn spans(&self) -> Spans {
        self.spans
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn modality(&self, index: usize) -> Modality {
        self.spans.modality(index)
    }

    pub fn hidden(&self) -> usize {
        self.embeddings.first().map_or(0, Vec::len)
    }

    /// Rebuilds the sequence with a new visual block, leaving text untouched.
    pub fn with_visual(&self, tokens: Vec<u32>, embeddings: Vec<Vec<f32>>) -> Result<Self> {
        let l_v = self.spans.visual;
        let mut all_tokens = tokens;
        let mut all_emb = embeddings;
        let visual = all_tokens.len();
        all_tokens.extend_from_slice(&self.tokens[l_v..]);
        all_emb.extend(self.embeddings[l_v..].iter().cloned());
        Self::new(all_tokens, all_emb, Spans::new(visual, self.spans.text))
    }
}
