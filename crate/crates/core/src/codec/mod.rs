//! Miniature convolutional audio codec: strided encoder, residual vector
//! quantizer and transposed-conv decoder.

mod checkpoint;
mod config;
mod model;
mod pretrain;
mod rvq;
#[cfg(test)]
mod tests;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CheckpointHeader, ParamEntry,
    FORMAT_VERSION,
};
pub use config::{stride_kernel, CodecConfig, PretrainConfig};
pub use model::{CodecModel, DecoderState, EncoderState, ResidualVq, TapeQuantized};
pub use pretrain::{evaluate_reconstruction, init_codebooks, pretrain_codec, PretrainRecord, ReconstructionMetrics};
pub use rvq::{codes_to_latent, quantize_with, Quantized};

use crate::error::Result;

impl CodecModel {
    /// Rebuilds a codec from the `codec` config and `codec.*` parameters of a checkpoint.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let mut model = CodecModel::new(ck.config_section("codec")?)?;
        model.params_mut().load_from(&ck.params)?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let cfg = serde_json::json!({ "codec": self.config() });
        save_checkpoint(path, &cfg, &[self.params()])
    }
}
