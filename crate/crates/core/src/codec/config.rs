use serde::{Deserialize, Serialize};

use crate::dsp::MelConfig;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodecConfig {
    pub sample_rate: u32,
    pub strides: Vec<usize>,
    pub base_channels: usize,
    pub latent_dim: usize,
    pub n_codebooks: usize,
    pub codebook_size: usize,
    pub snake_alpha_init: f64,
    /// Kernel of the dilation-free residual unit convs.
    pub residual_kernel: usize,
    pub seed: u64,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            strides: vec![2, 4, 5, 8],
            base_channels: 4,
            latent_dim: 64,
            n_codebooks: 4,
            codebook_size: 64,
            snake_alpha_init: 1.0,
            residual_kernel: 7,
            seed: 0,
        }
    }
}

impl CodecConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("codec: {m}")));
        if self.strides.is_empty() || self.strides.contains(&0) {
            return bad(format!("strides must be non-empty and >= 1, got {:?}", self.strides));
        }
        if self.base_channels == 0 || self.latent_dim == 0 || self.n_codebooks == 0 {
            return bad("base_channels, latent_dim and n_codebooks must be >= 1".into());
        }
        if self.codebook_size < 2 {
            return bad(format!("codebook_size must be >= 2, got {}", self.codebook_size));
        }
        if !(self.snake_alpha_init > 0.0) {
            return bad(format!("snake_alpha_init must be > 0, got {}", self.snake_alpha_init));
        }
        if self.residual_kernel % 2 == 0 {
            return bad(format!("residual_kernel must be odd, got {}", self.residual_kernel));
        }
        if self.sample_rate == 0 {
            return bad("sample_rate must be > 0".into());
        }
        Ok(())
    }

    /// Samples per latent frame.
    pub fn hop(&self) -> usize {
        self.strides.iter().product()
    }

    /// Channel width after each encoder stage, starting from `base_channels`.
    pub fn channels(&self) -> Vec<usize> {
        (0..=self.strides.len()).map(|i| self.base_channels << i).collect()
    }
}

/// Kernel and padding of a stride-`s` resampling conv; gives exact `T/s`
/// downsampling and `T·s` upsampling.
pub fn stride_kernel(s: usize) -> (usize, usize) {
    (s + 2 * (s / 2), s / 2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub l1_weight: f64,
    pub mel_weight: f64,
    pub commitment_weight: f64,
    pub codebook_weight: f64,
    /// Leading epochs in which the decoder sees the continuous latent.
    pub warmup_epochs: usize,
    /// Set from the run-level mel section when loaded from a run config.
    #[serde(skip)]
    pub mel: MelConfig,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            lr: 3e-3,
            batch_size: 4,
            l1_weight: 1.0,
            mel_weight: 0.01,
            commitment_weight: 0.25,
            codebook_weight: 1.0,
            warmup_epochs: 5,
            mel: MelConfig::default(),
            seed: 0,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || self.batch_size == 0 {
            return Err(Error::Config(format!("pretrain: lr {} and batch_size {} must be positive", self.lr, self.batch_size)));
        }
        let w = [self.l1_weight, self.mel_weight, self.commitment_weight, self.codebook_weight];
        if w.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Config(format!("pretrain: loss weights must be >= 0, got {w:?}")));
        }
        self.mel.validate()
    }
}
