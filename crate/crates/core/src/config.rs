//! The run configuration document shared by every command.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::{CodecConfig, PretrainConfig};
use crate::data::CorpusConfig;
use crate::dsp::MelConfig;
use crate::error::{Error, Result};
use crate::se::SEConfig;
use crate::train::TrainConfig;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerfConfig {
    pub durations: Vec<f64>,
    pub runs: usize,
    /// 1 pins timing to a single thread.
    pub threads: usize,
}

impl Default for PerfConfig {
    fn default() -> Self {
        Self { durations: vec![1.0, 5.0, 10.0], runs: 5, threads: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub codec: CodecConfig,
    pub pretrain: PretrainConfig,
    pub se: SEConfig,
    pub train: TrainConfig,
    pub mel: MelConfig,
    pub data: CorpusConfig,
    pub perf: PerfConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            codec: CodecConfig::default(),
            pretrain: PretrainConfig::default(),
            se: SEConfig::default(),
            train: TrainConfig::default(),
            mel: MelConfig::default(),
            data: CorpusConfig::default(),
            perf: PerfConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.version != CONFIG_VERSION {
            return Err(Error::Config(format!("unsupported config version {} (expected {CONFIG_VERSION})", cfg.version)));
        }
        cfg.sync();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Copies shared sections into the module configs that use them.
    pub fn sync(&mut self) {
        self.pretrain.mel = self.mel.clone();
        self.train.mel = self.mel.clone();
    }

    /// One seed for every seeded component.
    pub fn set_seed(&mut self, seed: u64) {
        self.codec.seed = seed;
        self.pretrain.seed = seed;
        self.se.seed = seed;
        self.train.seed = seed;
        self.data.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.codec.validate()?;
        self.pretrain.validate()?;
        self.se.validate()?;
        self.train.validate()?;
        self.mel.validate()?;
        self.data.snr.validate()?;
        if self.mel.sample_rate != self.codec.sample_rate || self.data.sample_rate != self.codec.sample_rate {
            return Err(Error::Config("codec, mel and data sample rates must agree".into()));
        }
        if self.perf.runs < crate::perf::MIN_RTF_RUNS || self.perf.threads == 0 {
            return Err(Error::Config("perf: runs >= 5 and threads >= 1 required".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
