//! Greedy residual vector quantization over `[D, T]` latents.

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Output of [`quantize_with`].
#[derive(Clone, Debug, PartialEq)]
pub struct Quantized {
    /// Sum of the selected codewords, `[D, T]`.
    pub quantized: Tensor,
    /// `codes[i][t]`: codeword picked by stage `i` for frame `t`.
    pub codes: Vec<Vec<usize>>,
    /// `mean((latent - quantized)^2)`.
    pub commit_loss: f64,
    /// Residual entering each stage followed by the final residual,
    /// `N_q + 1` tensors of shape `[D, T]`.
    pub residuals: Vec<Tensor>,
}

impl Quantized {
    /// `‖r_i‖²` per frame for every stage input and the final residual.
    pub fn residual_energy(&self) -> Vec<Vec<f64>> {
        let (d, t) = (self.quantized.shape()[0], self.quantized.shape()[1]);
        self.residuals.iter().map(|r| column_energy(r.data(), d, t)).collect()
    }
}

fn column_energy(x: &[f64], d: usize, t: usize) -> Vec<f64> {
    (0..t).map(|j| (0..d).map(|i| x[i * t + j] * x[i * t + j]).sum()).collect()
}

fn check_codebooks(codebooks: &[Tensor], d: usize) -> Result<usize> {
    let Some(first) = codebooks.first() else {
        return Err(Error::shape("quantize", "no codebooks"));
    };
    let k = first.shape().first().copied().unwrap_or(0);
    for (i, cb) in codebooks.iter().enumerate() {
        if cb.shape() != [k, d] {
            return Err(Error::shape("quantize", format!("codebook {i} has shape {:?}, expected [{k}, {d}]", cb.shape())));
        }
    }
    Ok(k)
}

/// Nearest codeword to column `t` of `r`; ties keep the lowest index.
fn nearest(cb: &[f64], k: usize, d: usize, r: &[f64], t: usize, tt: usize) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for c in 0..k {
        let row = &cb[c * d..(c + 1) * d];
        let dist: f64 = (0..d).map(|i| (r[i * tt + t] - row[i]).powi(2)).sum();
        if dist < best_dist {
            best = c;
            best_dist = dist;
        }
    }
    best
}

/// Sum of one codeword per stage for every frame, accumulated in stage order.
pub fn codes_to_latent(codebooks: &[Tensor], codes: &[Vec<usize>]) -> Result<Tensor> {
    let Some(first) = codebooks.first() else {
        return Err(Error::shape("codes_to_latent", "no codebooks"));
    };
    let d = first.shape().get(1).copied().unwrap_or(0);
    let k = check_codebooks(codebooks, d)?;
    if codes.len() != codebooks.len() {
        return Err(Error::shape("codes_to_latent", format!("{} code rows for {} codebooks", codes.len(), codebooks.len())));
    }
    let t = codes.first().map_or(0, Vec::len);
    let mut out = vec![0.0; d * t];
    for (cb, row) in codebooks.iter().zip(codes) {
        if row.len() != t {
            return Err(Error::shape("codes_to_latent", "ragged code rows"));
        }
        for (j, &c) in row.iter().enumerate() {
            if c >= k {
                return Err(Error::arg("codes_to_latent", format!("code {c} out of range for K={k}")));
            }
            let w = &cb.data()[c * d..(c + 1) * d];
            for i in 0..d {
                out[i * t + j] += w[i];
            }
        }
    }
    Tensor::new(vec![d, t], out)
}

/// Greedy residual quantization of `latent: [D, T]` with `[K, D]` codebooks.
pub fn quantize_with(codebooks: &[Tensor], latent: &Tensor) -> Result<Quantized> {
    let &[d, t] = latent.shape() else {
        return Err(Error::shape("quantize", format!("latent must be [D, T], got {:?}", latent.shape())));
    };
    let k = check_codebooks(codebooks, d)?;
    if !latent.is_finite() {
        return Err(Error::NonFinite { context: "quantize input".into() });
    }
    let mut r = latent.data().to_vec();
    let mut codes = Vec::with_capacity(codebooks.len());
    let mut residuals = Vec::with_capacity(codebooks.len());
    for cb in codebooks {
        residuals.push(Tensor::new(vec![d, t], r.clone())?);
        let row: Vec<usize> = (0..t).map(|j| nearest(cb.data(), k, d, &r, j, t)).collect();
        for (j, &c) in row.iter().enumerate() {
            for i in 0..d {
                r[i * t + j] -= cb.data()[c * d + i];
            }
        }
        codes.push(row);
    }
    residuals.push(Tensor::new(vec![d, t], r)?);
    let quantized = codes_to_latent(codebooks, &codes)?;
    let n = (d * t).max(1) as f64;
    let commit_loss = latent.data().iter().zip(quantized.data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
    Ok(Quantized { quantized, codes, commit_loss, residuals })
}
