//! End-to-end enhancement: encode, enhance in latent space, quantize, decode.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::codec::{load_checkpoint, save_checkpoint, Checkpoint, CodecModel};
use crate::error::{Error, Result};
use crate::se::{SEConfig, SEModel};

/// Wall-clock seconds spent in each stage of one enhancement.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub encode: f64,
    pub se: f64,
    pub quantize: f64,
    pub decode: f64,
}

impl StageTimes {
    pub fn total(&self) -> f64 {
        self.encode + self.se + self.quantize + self.decode
    }
}

#[derive(Clone, Debug)]
pub struct Enhanced {
    pub wave: Vec<f64>,
    pub y_e: Tensor,
    pub y_h: Tensor,
    pub times: StageTimes,
}

/// A frozen codec paired with an SE model over the same latent width.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub codec: CodecModel,
    pub se: SEModel,
}

impl Pipeline {
    pub fn new(codec: CodecModel, se: SEModel) -> Result<Self> {
        if codec.config().latent_dim != se.latent_dim() {
            return Err(Error::Config(format!(
                "codec latent_dim {} does not match SE input {}",
                codec.config().latent_dim,
                se.latent_dim()
            )));
        }
        Ok(Self { codec, se })
    }

    pub fn enhance(&self, wave: &[f64]) -> Result<Enhanced> {
        let t0 = Instant::now();
        let y_e = self.codec.encode(wave)?;
        let t1 = Instant::now();
        let y_h = self.se.forward(&y_e)?;
        let t2 = Instant::now();
        let q = self.codec.quantize(&y_h)?;
        let t3 = Instant::now();
        let mut out = self.codec.decode(&q.quantized)?;
        out.truncate(wave.len());
        let t4 = Instant::now();
        let times = StageTimes {
            encode: (t1 - t0).as_secs_f64(),
            se: (t2 - t1).as_secs_f64(),
            quantize: (t3 - t2).as_secs_f64(),
            decode: (t4 - t3).as_secs_f64(),
        };
        Ok(Enhanced { wave: out, y_e, y_h, times })
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let codec = CodecModel::from_checkpoint(ck)?;
        let mut se = SEModel::new(ck.config_section::<SEConfig>("se")?, codec.config().latent_dim)?;
        se.params_mut().load_from(&ck.params)?;
        Self::new(codec, se)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint(&load_checkpoint(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let cfg = serde_json::json!({ "codec": self.codec.config(), "se": self.se.config() });
        save_checkpoint(path, &cfg, &[self.codec.params(), self.se.params()])
    }
}
