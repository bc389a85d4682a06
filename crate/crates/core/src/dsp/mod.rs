//! Spectral analysis, mel filterbanks, SNR mixing gains and SI-SNR.

mod mel;
mod snr;
mod spectrum;

pub use mel::{hz_to_mel, mel_filterbank, mel_spectrogram, mel_to_hz, MelConfig, MelPlan};
pub use snr::{median, power, si_snr, si_snr_uncapped, snr_db, snr_gain, SnrRange, SI_SNR_CAP_DB};
pub use spectrum::{dft_direct, frame_count, hann, DftPath, FramePlan};
