use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest magnitude reported by [`si_snr`], in dB.
pub const SI_SNR_CAP_DB: f64 = 60.0;

/// Closed interval of mixing SNRs in dB.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrRange {
    pub low: f64,
    pub high: f64,
}

impl Default for SnrRange {
    fn default() -> Self {
        Self { low: -5.0, high: 20.0 }
    }
}

impl SnrRange {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        let r = Self { low, high };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.low.is_finite() && self.high.is_finite() && self.low <= self.high) {
            return Err(Error::Config(format!("snr range [{}, {}] is not ordered", self.low, self.high)));
        }
        Ok(())
    }
}

/// Mean square.
pub fn power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Noise gain that puts `clean + g·noise` at `target_snr_db`.
pub fn snr_gain(clean: &[f64], noise: &[f64], target_snr_db: f64) -> Result<f64> {
    if clean.len() != noise.len() {
        return Err(Error::shape("snr_gain", format!("clean has {} samples, noise {}", clean.len(), noise.len())));
    }
    let pn = power(noise);
    if !(pn > 0.0) || !pn.is_finite() {
        return Err(Error::arg("snr_gain", "noise is silent"));
    }
    Ok((power(clean) / (pn * 10f64.powf(target_snr_db / 10.0))).sqrt())
}

/// Power ratio of `signal` to `noise` in dB.
pub fn snr_db(signal: &[f64], noise: &[f64]) -> f64 {
    10.0 * (power(signal) / power(noise)).log10()
}

/// Scale-invariant SNR without the cap; `+inf` for a perfect match.
///
/// The estimate is projected onto the reference (no mean removal):
/// `target = (<est, ref> / |ref|²) ref`, `error = est - target`.
pub fn si_snr_uncapped(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(Error::shape("si_snr", format!("reference {} vs estimate {} samples", reference.len(), estimate.len())));
    }
    let ref_energy = dot(reference, reference);
    if !(ref_energy > 0.0) {
        return Err(Error::arg("si_snr", "reference is silent"));
    }
    let scale = dot(estimate, reference) / ref_energy;
    let target_energy = scale * scale * ref_energy;
    let err_energy: f64 = reference.iter().zip(estimate).map(|(r, e)| (e - scale * r).powi(2)).sum();
    if err_energy == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (target_energy / err_energy).log10())
}

/// Scale-invariant SNR in dB, clamped to `±SI_SNR_CAP_DB`.
pub fn si_snr(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    Ok(si_snr_uncapped(reference, estimate)?.clamp(-SI_SNR_CAP_DB, SI_SNR_CAP_DB))
}

/// Median of `v`; NaN for an empty slice.
pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}
