use rand::Rng;

use crate::dsp::{snr_gain, SnrRange};
use crate::error::{Error, Result};

/// Largest absolute sample value allowed in a mixture.
pub const MIX_PEAK: f64 = 0.99;

/// A clean utterance and its noisy version at a recorded SNR.
#[derive(Clone, Debug, PartialEq)]
pub struct MixturePair {
    pub clean: Vec<f64>,
    pub noisy: Vec<f64>,
    pub snr_db: f64,
}

/// Mixes at an exact SNR; both signals are rescaled together if the mixture
/// would exceed [`MIX_PEAK`], which leaves the SNR unchanged.
pub fn mix_at_snr(clean: &[f64], noise: &[f64], snr_db: f64) -> Result<MixturePair> {
    if clean.len() != noise.len() {
        return Err(Error::shape("make_mixture", format!("clean has {} samples, noise {}", clean.len(), noise.len())));
    }
    let g = snr_gain(clean, noise, snr_db)?;
    let mut noisy: Vec<f64> = clean.iter().zip(noise).map(|(c, n)| c + g * n).collect();
    let mut clean = clean.to_vec();
    let peak = noisy.iter().chain(&clean).fold(0.0f64, |a, v| a.max(v.abs()));
    if peak > MIX_PEAK {
        let s = MIX_PEAK / peak;
        noisy.iter_mut().for_each(|v| *v *= s);
        clean.iter_mut().for_each(|v| *v *= s);
    }
    Ok(MixturePair { clean, noisy, snr_db })
}

/// Mixes at an SNR drawn uniformly from `range`.
pub fn make_mixture(clean: &[f64], noise: &[f64], range: &SnrRange, rng: &mut impl Rng) -> Result<MixturePair> {
    range.validate()?;
    let snr = if range.low == range.high { range.low } else { rng.gen_range(range.low..=range.high) };
    mix_at_snr(clean, noise, snr)
}
