//! Seeded corpora, on-the-fly noisy mixtures and batching.
//!
//! Every waveform is a pure function of `(seed, epoch, index)`; generation may
//! run on any number of threads without changing a single bit.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::mixture::{make_mixture, MixturePair};
use super::synth::{derive_seed, synthesize, SourceKind, UtteranceSpec};
use super::wav::wav_read;
use crate::autodiff::Tensor;
use crate::dsp::SnrRange;
use crate::error::{Error, Result};

const CLEAN_STREAM: u64 = 0xC1EA_0000;
const SHUFFLE_STREAM: u64 = 0x5AFF_1E00;
/// Epoch id under which validation mixtures are generated.
pub const VALIDATION_EPOCH: u64 = u64::MAX;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    pub seed: u64,
    pub n_utterances: usize,
    pub sample_rate: u32,
    /// Fixed crop length in seconds.
    pub crop_seconds: f64,
    pub snr: SnrRange,
    /// Every `validation_every`-th utterance is held out.
    pub validation_every: usize,
    /// Optional manifest of clean WAV files replacing synthetic speech.
    pub manifest: Option<PathBuf>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_utterances: 200,
            sample_rate: 16_000,
            crop_seconds: 0.5,
            snr: SnrRange::default(),
            validation_every: 10,
            manifest: None,
        }
    }
}

/// A batch of equal-length clean/noisy pairs, `[B, L]` each.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub clean: Tensor,
    pub noisy: Tensor,
    pub snr_db: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    fn row(t: &Tensor, i: usize) -> &[f64] {
        let l = t.shape()[1];
        &t.data()[i * l..(i + 1) * l]
    }

    pub fn clean_row(&self, i: usize) -> &[f64] {
        Self::row(&self.clean, i)
    }

    pub fn noisy_row(&self, i: usize) -> &[f64] {
        Self::row(&self.noisy, i)
    }

    pub fn from_pairs(indices: Vec<usize>, pairs: Vec<MixturePair>) -> Result<Self> {
        let l = pairs.first().map_or(0, |p| p.clean.len());
        if pairs.iter().any(|p| p.clean.len() != l || p.noisy.len() != l) {
            return Err(Error::shape("batch", "pairs have different lengths"));
        }
        let b = pairs.len();
        let snr_db = pairs.iter().map(|p| p.snr_db).collect();
        let mut clean = Vec::with_capacity(b * l);
        let mut noisy = Vec::with_capacity(b * l);
        for p in pairs {
            clean.extend(p.clean);
            noisy.extend(p.noisy);
        }
        Ok(Self { indices, clean: Tensor::new([b, l], clean)?, noisy: Tensor::new([b, l], noisy)?, snr_db })
    }
}

/// Reads one path per line; blank lines and `#` comments are skipped.
/// Relative paths resolve against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<Vec<PathBuf>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.split_whitespace().map(|p| base.join(p)).collect())
        .collect())
}

#[derive(Clone, Debug)]
enum CleanSource {
    Synthetic,
    Files(Vec<Vec<f64>>),
}

/// A deterministic training/validation corpus.
#[derive(Clone, Debug)]
pub struct Corpus {
    cfg: CorpusConfig,
    source: CleanSource,
    train: Vec<usize>,
    validation: Vec<usize>,
}

impl Corpus {
    pub fn new(cfg: CorpusConfig) -> Result<Self> {
        cfg.snr.validate()?;
        if cfg.validation_every < 2 {
            return Err(Error::Config("corpus: validation_every must be >= 2".into()));
        }
        let source = match &cfg.manifest {
            None => CleanSource::Synthetic,
            Some(m) => {
                let mut waves = Vec::new();
                for entry in read_manifest(m)? {
                    let wav = wav_read(&entry[0])?;
                    if wav.sample_rate != cfg.sample_rate {
                        return Err(Error::Wav(format!(
                            "{}: sample rate {} differs from corpus rate {}",
                            entry[0].display(),
                            wav.sample_rate,
                            cfg.sample_rate
                        )));
                    }
                    waves.push(wav.samples);
                }
                CleanSource::Files(waves)
            }
        };
        let n = match &source {
            CleanSource::Synthetic => cfg.n_utterances,
            CleanSource::Files(w) => w.len(),
        };
        if n == 0 {
            return Err(Error::Config("corpus is empty".into()));
        }
        let (validation, train): (Vec<usize>, Vec<usize>) =
            (0..n).partition(|i| i % cfg.validation_every == cfg.validation_every - 1);
        Ok(Self { cfg, source, train, validation })
    }

    pub fn config(&self) -> &CorpusConfig {
        &self.cfg
    }

    pub fn crop_len(&self) -> usize {
        (self.cfg.crop_seconds * self.cfg.sample_rate as f64).round() as usize
    }

    pub fn train_indices(&self) -> &[usize] {
        &self.train
    }

    pub fn validation_indices(&self) -> &[usize] {
        &self.validation
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Clean crop for an utterance; independent of epoch.
    pub fn clean(&self, index: usize) -> Result<Vec<f64>> {
        let len = self.crop_len();
        match &self.source {
            CleanSource::Synthetic => {
                let spec = UtteranceSpec {
                    seed: derive_seed(self.cfg.seed, CLEAN_STREAM, index as u64),
                    duration: self.cfg.crop_seconds,
                    sample_rate: self.cfg.sample_rate,
                    kind: SourceKind::PseudoSpeech,
                };
                synthesize(&spec)
            }
            CleanSource::Files(w) => {
                let mut x: Vec<f64> = w[index].iter().copied().take(len).collect();
                x.resize(len, 0.0);
                Ok(x)
            }
        }
    }

    /// Noise crop and mixture for `index` in `epoch`.
    pub fn mixture(&self, index: usize, epoch: u64) -> Result<MixturePair> {
        let clean = self.clean(index)?;
        let seed = derive_seed(self.cfg.seed, epoch, index as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kind = match rng.gen_range(0..3) {
            0 => SourceKind::White,
            1 => SourceKind::Pink,
            _ => SourceKind::BandLimited,
        };
        let spec = UtteranceSpec { seed: rng.gen(), duration: self.cfg.crop_seconds, sample_rate: self.cfg.sample_rate, kind };
        let noise = synthesize(&spec)?;
        make_mixture(&clean, &noise, &self.cfg.snr, &mut rng)
    }

    /// Shuffled training order for an epoch, split into batches.
    pub fn epoch_batches(&self, epoch: u64, batch_size: usize) -> Vec<Vec<usize>> {
        let mut order = self.train.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.cfg.seed, SHUFFLE_STREAM, epoch));
        order.shuffle(&mut rng);
        order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
    }

    /// Materializes a batch, generating items in parallel.
    pub fn batch(&self, indices: &[usize], epoch: u64) -> Result<Batch> {
        let pairs = indices.par_iter().map(|&i| self.mixture(i, epoch)).collect::<Result<Vec<_>>>()?;
        Batch::from_pairs(indices.to_vec(), pairs)
    }

    /// The `k`-th batch of `epoch`.
    pub fn epoch_batch(&self, epoch: u64, k: usize, batch_size: usize) -> Result<Batch> {
        let batches = self.epoch_batches(epoch, batch_size);
        let idx = batches.get(k).ok_or_else(|| Error::arg("batch", format!("epoch has {} batches, asked for #{k}", batches.len())))?;
        self.batch(idx, epoch)
    }

    /// Fixed validation mixtures.
    pub fn validation_set(&self) -> Result<Vec<MixturePair>> {
        self.validation.par_iter().map(|&i| self.mixture(i, VALIDATION_EPOCH)).collect()
    }

    /// SHA-256 over every clean waveform's bit pattern, hex encoded.
    pub fn content_hash(&self) -> Result<String> {
        let mut h = Sha256::new();
        for i in 0..self.len() {
            for v in self.clean(i)? {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }
}
