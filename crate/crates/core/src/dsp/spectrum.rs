//! Short-time Fourier transforms with two interchangeable DFT back ends.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Which transform computes each frame's spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DftPath {
    /// O(n²) direct summation; the reference.
    Direct,
    #[default]
    Fft,
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

/// One-sided DFT (`n/2 + 1` bins) by direct summation.
pub fn dft_direct(frame: &[f64]) -> Vec<Complex64> {
    let n = frame.len();
    (0..=n / 2)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, &x) in frame.iter().enumerate() {
                // reduce the phase index first to keep the angle small
                let theta = -2.0 * PI * ((k * i) % n) as f64 / n as f64;
                acc += Complex64::new(x * theta.cos(), x * theta.sin());
            }
            acc
        })
        .collect()
}

/// Planned forward and inverse transforms for one frame size.
#[derive(Clone)]
pub struct FramePlan {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FramePlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FramePlan").field("n", &self.n).finish()
    }
}

impl FramePlan {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// One-sided spectrum of a real frame.
    pub fn spectrum(&self, frame: &[f64], path: DftPath) -> Vec<Complex64> {
        debug_assert_eq!(frame.len(), self.n);
        match path {
            DftPath::Direct => dft_direct(frame),
            DftPath::Fft => {
                let mut buf: Vec<Complex64> = frame.iter().map(|&x| Complex64::new(x, 0.0)).collect();
                self.forward.process(&mut buf);
                buf.truncate(self.n / 2 + 1);
                buf
            }
        }
    }

    /// `Re Σ_k z_k e^{+2πikn/N}` for one-sided coefficients `z` (unnormalized).
    pub fn one_sided_synthesis(&self, z: &[Complex64]) -> Vec<f64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n];
        buf[..z.len()].copy_from_slice(z);
        self.inverse.process(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }
}

/// Number of full frames; no centering or edge padding.
pub fn frame_count(len: usize, n_fft: usize, hop: usize) -> Option<usize> {
    (len >= n_fft && hop > 0).then(|| (len - n_fft) / hop + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_and_fft_paths_agree() {
        for &n in &[8usize, 64, 1024, 400] {
            let frame: Vec<f64> = (0..n).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
            let plan = FramePlan::new(n);
            let a = plan.spectrum(&frame, DftPath::Direct);
            let b = plan.spectrum(&frame, DftPath::Fft);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).norm() <= 1e-9, "n={n}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn pure_cosine_lands_in_its_bin() {
        let n = 64;
        let frame: Vec<f64> = (0..n).map(|i| (2.0 * PI * 5.0 * i as f64 / n as f64).cos()).collect();
        let s = dft_direct(&frame);
        assert!((s[5].re - 32.0).abs() < 1e-9);
        assert!(s.iter().enumerate().filter(|(k, _)| *k != 5).all(|(_, c)| c.norm() < 1e-9));
    }

    #[test]
    fn frame_count_formula() {
        assert_eq!(frame_count(16000, 1024, 256), Some(59));
        assert_eq!(frame_count(1024, 1024, 256), Some(1));
        assert_eq!(frame_count(1023, 1024, 256), None);
    }
}
