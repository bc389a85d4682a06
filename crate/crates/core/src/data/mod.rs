//! Synthetic corpora, noisy mixtures and WAV files.

mod corpus;
mod mixture;
mod synth;
mod wav;

pub use corpus::{read_manifest, Batch, Corpus, CorpusConfig, VALIDATION_EPOCH};
pub use mixture::{make_mixture, mix_at_snr, MixturePair, MIX_PEAK};
pub use synth::{derive_seed, gen_clean, splitmix64, synthesize, SourceKind, UtteranceSpec};
pub use wav::{pcm_to_sample, sample_to_pcm, wav_read, wav_write, WavData, PCM_SCALE};
