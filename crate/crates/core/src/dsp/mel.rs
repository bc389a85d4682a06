use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::spectrum::{frame_count, hann, DftPath, FramePlan};
use crate::autodiff::kernels::gemm_acc;
use crate::autodiff::{CustomOp, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Mel spectrogram settings.
///
/// The spectrogram is `filterbank · |STFT|^power` with no log compression.
/// With `normalized`, each frame's DFT is divided by `sqrt(Σ window²)` so a
/// white signal of variance σ² has expected per-bin power σ².
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MelConfig {
    pub sample_rate: u32,
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub power: f64,
    pub normalized: bool,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self { sample_rate: 16_000, n_fft: 1024, hop: 256, n_mels: 80, f_min: 0.0, f_max: 8000.0, power: 2.0, normalized: true }
    }
}

impl MelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("mel: {m}")));
        if self.n_fft < 2 || self.hop == 0 || self.n_mels == 0 {
            return bad("n_fft >= 2, hop >= 1 and n_mels >= 1 required".into());
        }
        if self.hop > self.n_fft {
            return bad(format!("hop {} exceeds n_fft {}", self.hop, self.n_fft));
        }
        if !(self.f_min >= 0.0 && self.f_min < self.f_max && self.f_max <= self.sample_rate as f64 / 2.0) {
            return bad(format!("need 0 <= f_min < f_max <= sample_rate/2, got {}..{}", self.f_min, self.f_max));
        }
        if !(self.power > 0.0) {
            return bad(format!("power must be > 0, got {}", self.power));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular HTK-scale filters with unit peak, `[n_mels, n_fft/2 + 1]`.
pub fn mel_filterbank(cfg: &MelConfig) -> Tensor {
    let n_bins = cfg.n_bins();
    let (lo, hi) = (hz_to_mel(cfg.f_min), hz_to_mel(cfg.f_max));
    let edges: Vec<f64> = (0..cfg.n_mels + 2).map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.n_mels + 1) as f64)).collect();
    let mut fb = vec![0.0; cfg.n_mels * n_bins];
    for m in 0..cfg.n_mels {
        let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
        for k in 0..n_bins {
            let f = k as f64 * cfg.sample_rate as f64 / cfg.n_fft as f64;
            let up = (f - left) / (center - left);
            let down = (right - f) / (right - center);
            fb[m * n_bins + k] = up.min(down).max(0.0);
        }
    }
    Tensor::new([cfg.n_mels, n_bins], fb).expect("filterbank shape")
}

/// Precomputed window, filterbank and transforms for one [`MelConfig`].
#[derive(Clone, Debug)]
pub struct MelPlan {
    cfg: MelConfig,
    window: Vec<f64>,
    filterbank: Tensor,
    frames: FramePlan,
    path: DftPath,
}

impl MelPlan {
    pub fn new(cfg: &MelConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg: cfg.clone(),
            window: hann(cfg.n_fft),
            filterbank: mel_filterbank(cfg),
            frames: FramePlan::new(cfg.n_fft),
            path: DftPath::Fft,
        })
    }

    /// Same plan computing spectra with the given DFT path.
    pub fn with_path(mut self, path: DftPath) -> Self {
        self.path = path;
        self
    }

    pub fn config(&self) -> &MelConfig {
        &self.cfg
    }

    pub fn filterbank(&self) -> &Tensor {
        &self.filterbank
    }

    pub fn n_frames(&self, len: usize) -> Result<usize> {
        frame_count(len, self.cfg.n_fft, self.cfg.hop).ok_or_else(|| {
            Error::arg("mel_spectrogram", format!("input of {len} samples is shorter than one {}-sample frame", self.cfg.n_fft))
        })
    }

    fn scale(&self) -> f64 {
        if self.cfg.normalized {
            1.0 / self.window.iter().map(|w| w * w).sum::<f64>().sqrt()
        } else {
            1.0
        }
    }

    /// Windowed one-sided spectra, frame-major `[n_frames][n_bins]`.
    fn spectra(&self, wave: &[f64]) -> Result<Vec<Vec<Complex64>>> {
        let n_frames = self.n_frames(wave.len())?;
        let scale = self.scale();
        let n = self.cfg.n_fft;
        let mut buf = vec![0.0; n];
        Ok((0..n_frames)
            .map(|f| {
                let seg = &wave[f * self.cfg.hop..f * self.cfg.hop + n];
                for ((b, x), w) in buf.iter_mut().zip(seg).zip(&self.window) {
                    *b = x * w * scale;
                }
                self.frames.spectrum(&buf, self.path)
            })
            .collect())
    }

    /// `[n_mels, n_frames]` from per-frame spectra.
    fn project(&self, spectra: &[Vec<Complex64>]) -> Vec<f64> {
        let n_bins = self.cfg.n_bins();
        let n_frames = spectra.len();
        // power spectrum laid out [n_bins, n_frames]
        let mut p = vec![0.0; n_bins * n_frames];
        for (f, s) in spectra.iter().enumerate() {
            for (k, c) in s.iter().enumerate() {
                p[k * n_frames + f] = self.power_of(c.norm_sqr());
            }
        }
        let mut out = vec![0.0; self.cfg.n_mels * n_frames];
        gemm_acc(self.cfg.n_mels, n_bins, n_frames, self.filterbank.data(), false, &p, false, &mut out);
        out
    }

    fn power_of(&self, mag_sq: f64) -> f64 {
        if self.cfg.power == 2.0 {
            mag_sq
        } else {
            mag_sq.powf(self.cfg.power / 2.0)
        }
    }

    /// d power / d |X|², with the subgradient 0 at the origin.
    fn power_slope(&self, mag_sq: f64) -> f64 {
        if self.cfg.power == 2.0 {
            1.0
        } else if mag_sq == 0.0 {
            0.0
        } else {
            self.cfg.power / 2.0 * mag_sq.powf(self.cfg.power / 2.0 - 1.0)
        }
    }

    /// Mel spectrogram `[n_mels, n_frames]` of a waveform.
    pub fn compute(&self, wave: &[f64]) -> Result<Tensor> {
        let spectra = self.spectra(wave)?;
        let n_frames = spectra.len();
        Tensor::new([self.cfg.n_mels, n_frames], self.project(&spectra))
    }

    /// Differentiable mel spectrogram of a 1-D tape value.
    pub fn on_tape(&self, tape: &mut Tape, wave: Var) -> Result<Var> {
        let len = tape.value(wave).len();
        if tape.shape(wave).len() != 1 {
            return Err(Error::shape("mel_spectrogram", format!("expected 1-D waveform, got {:?}", tape.shape(wave))));
        }
        let spectra = self.spectra(tape.value(wave))?;
        let n_frames = spectra.len();
        let value = self.project(&spectra);
        let op = MelBackward { plan: self.clone(), spectra, len };
        tape.custom(wave, vec![self.cfg.n_mels, n_frames], value, Box::new(op))
    }
}

struct MelBackward {
    plan: MelPlan,
    spectra: Vec<Vec<Complex64>>,
    len: usize,
}

impl CustomOp for MelBackward {
    fn name(&self) -> &'static str {
        "mel_spectrogram"
    }

    fn backward(&self, _input: &[f64], grad_out: &[f64]) -> Vec<f64> {
        let cfg = &self.plan.cfg;
        let n_bins = cfg.n_bins();
        let n_frames = self.spectra.len();
        // gradient wrt the power spectrum: fbᵀ · g, laid out [n_bins, n_frames]
        let mut gp = vec![0.0; n_bins * n_frames];
        gemm_acc(n_bins, cfg.n_mels, n_frames, self.plan.filterbank.data(), true, grad_out, false, &mut gp);
        let scale = self.plan.scale();
        let mut gx = vec![0.0; self.len];
        let mut z = vec![Complex64::new(0.0, 0.0); n_bins];
        for (f, spec) in self.spectra.iter().enumerate() {
            for (k, c) in spec.iter().enumerate() {
                z[k] = c * (gp[k * n_frames + f] * self.plan.power_slope(c.norm_sqr()));
            }
            let synth = self.plan.frames.one_sided_synthesis(&z);
            let start = f * cfg.hop;
            for (i, s) in synth.iter().enumerate() {
                gx[start + i] += 2.0 * scale * self.plan.window[i] * s;
            }
        }
        gx
    }
}

/// One-shot mel spectrogram of a waveform.
pub fn mel_spectrogram(wave: &[f64], cfg: &MelConfig) -> Result<Tensor> {
    MelPlan::new(cfg)?.compute(wave)
}
