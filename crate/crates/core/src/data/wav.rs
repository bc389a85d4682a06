//! 16-bit PCM mono WAV I/O.
//!
//! Samples map to floats as `s / 32768` on read and back as
//! `round(x · 32768)` clamped to the int16 range on write, so any value read
//! from a file is written back to the identical sample.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};

pub const PCM_SCALE: f64 = 32768.0;

#[derive(Clone, Debug, PartialEq)]
pub struct WavData {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

pub fn sample_to_pcm(x: f64) -> i16 {
    (x * PCM_SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

pub fn pcm_to_sample(s: i16) -> f64 {
    s as f64 / PCM_SCALE
}

// The file is already open when hound reports an I/O error, so a short read
// means a truncated or malformed file rather than an unreadable path.
fn wav_err(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::Wav(format!("{}: truncated or malformed file ({io})", path.display())),
        other => Error::Wav(format!("{}: {other}", path.display())),
    }
}

pub fn wav_read(path: impl AsRef<Path>) -> Result<WavData> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = hound::WavReader::new(BufReader::new(file)).map_err(|e| wav_err(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Wav(format!("{}: {} channels, only mono is supported", path.display(), spec.channels)));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::Wav(format!(
            "{}: {}-bit {:?} samples, only 16-bit PCM is supported",
            path.display(),
            spec.bits_per_sample,
            spec.sample_format
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(pcm_to_sample).map_err(|e| wav_err(path, e)))
        .collect::<Result<Vec<_>>>()?;
    Ok(WavData { samples, sample_rate: spec.sample_rate })
}

/// Writes through a temporary file in the target directory and renames it into
/// place, so a failed write never leaves a partial file behind.
pub fn wav_write(path: impl AsRef<Path>, samples: &[f64], sample_rate: u32) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec { channels: 1, sample_rate, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
    crate::io::write_atomic(path, |file| {
        let mut w = hound::WavWriter::new(BufWriter::new(file), spec).map_err(|e| wav_err(path, e))?;
        for &x in samples {
            w.write_sample(sample_to_pcm(x)).map_err(|e| wav_err(path, e))?;
        }
        w.finalize().map_err(|e| wav_err(path, e))
    })
}
