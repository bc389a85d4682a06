use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SEConfig {
    pub n_blocks: usize,
    pub emb: usize,
    pub n_heads: usize,
    pub ffn_mult: usize,
    pub mod_kernel: usize,
    pub positional_encoding: bool,
    pub layer_norm_eps: f64,
    pub seed: u64,
}

impl Default for SEConfig {
    fn default() -> Self {
        Self {
            n_blocks: 8,
            emb: 256,
            n_heads: 4,
            ffn_mult: 4,
            mod_kernel: 3,
            positional_encoding: true,
            layer_norm_eps: 1e-5,
            seed: 0,
        }
    }
}

impl SEConfig {
    pub fn validate(&self) -> Result<()> {
        if self.emb == 0 || self.n_heads == 0 || self.emb % self.n_heads != 0 {
            return Err(Error::Config(format!("se: emb {} must be a positive multiple of n_heads {}", self.emb, self.n_heads)));
        }
        if self.ffn_mult == 0 {
            return Err(Error::Config("se: ffn_mult must be >= 1".into()));
        }
        if self.mod_kernel % 2 == 0 {
            return Err(Error::Config(format!("se: mod_kernel must be odd for same padding, got {}", self.mod_kernel)));
        }
        if !(self.layer_norm_eps >= 0.0) {
            return Err(Error::Config("se: layer_norm_eps must be >= 0".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.emb / self.n_heads
    }
}
