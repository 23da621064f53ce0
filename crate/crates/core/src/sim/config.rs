use serde::{Deserialize, Serialize};

use super::vocab::MIN_VOCAB;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub num_heads: usize,
    pub head_dim: usize,
    pub vocab_size: usize,
    pub seed: u64,
    pub max_seq_len: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            num_layers: 4,
            num_heads: 4,
            head_dim: 16,
            vocab_size: 512,
            seed: 0,
            max_seq_len: 8192,
        }
    }
}

impl ModelConfig {
    pub fn new(num_layers: usize, num_heads: usize, head_dim: usize, seed: u64) -> Self {
        Self {
            num_layers,
            num_heads,
            head_dim,
            seed,
            ..Self::default()
        }
    }

    pub fn hidden(&self) -> usize {
        self.num_heads * self.head_dim
    }

    pub fn mlp_hidden(&self) -> usize {
        2 * self.hidden()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers < 2 {
            return Err(Error::InvalidConfig(format!(
                "num_layers must be >= 2, got {}",
                self.num_layers
            )));
        }
        if self.num_heads < 2 {
            return Err(Error::InvalidConfig(format!(
                "num_heads must be >= 2, got {}",
                self.num_heads
            )));
        }
        if self.head_dim == 0 {
            return Err(Error::InvalidConfig("head_dim must be positive".into()));
        }
        if self.hidden() < 4 {
            return Err(Error::InvalidConfig(format!(
                "num_heads * head_dim must be >= 4, got {}",
                self.hidden()
            )));
        }
        if self.vocab_size < MIN_VOCAB {
            return Err(Error::InvalidConfig(format!(
                "vocab_size must be >= {MIN_VOCAB}, got {}",
                self.vocab_size
            )));
        }
        if self.max_seq_len == 0 {
            return Err(Error::InvalidConfig("max_seq_len must be positive".into()));
        }
        Ok(())
    }
}
