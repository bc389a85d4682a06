//! Training objective: latent L1, waveform L1, mel distance and their weighted sum.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::codec::CodecModel;
use crate::dsp::MelPlan;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 500.0, gamma: 1.0 / 11.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.alpha, self.beta, self.gamma].iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Config(format!("loss weights must be finite and >= 0, got {self:?}")));
        }
        Ok(())
    }
}

/// Component losses and their weighted total.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_emb: f64,
    pub l_time: f64,
    pub l_freq: f64,
    pub l_overall: f64,
}

impl LossBreakdown {
    pub fn new(l_emb: f64, l_time: f64, l_freq: f64, w: &LossWeights) -> Self {
        Self { l_emb, l_time, l_freq, l_overall: overall_loss(l_emb, l_time, l_freq, w) }
    }
}

/// `α·l_emb + β·l_time + γ·l_freq`, evaluated left to right.
pub fn overall_loss(l_emb: f64, l_time: f64, l_freq: f64, w: &LossWeights) -> f64 {
    w.alpha * l_emb + w.beta * l_time + w.gamma * l_freq
}

fn same_len(op: &'static str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::shape(op, format!("lengths {a} vs {b}")));
    }
    Ok(())
}

pub fn emb_loss(x_e: &Tensor, y_h: &Tensor) -> Result<f64> {
    if x_e.shape() != y_h.shape() {
        return Err(Error::shape("emb_loss", format!("{:?} vs {:?}", x_e.shape(), y_h.shape())));
    }
    Ok(x_e.data().iter().zip(y_h.data()).map(|(a, b)| (a - b).abs()).sum::<f64>() / x_e.len().max(1) as f64)
}

pub fn time_loss(x_out: &[f64], y_out: &[f64]) -> Result<f64> {
    same_len("time_loss", x_out.len(), y_out.len())?;
    Ok(x_out.iter().zip(y_out).map(|(a, b)| (a - b).abs()).sum::<f64>() / x_out.len().max(1) as f64)
}

pub fn freq_loss(x_out: &[f64], y_out: &[f64], plan: &MelPlan) -> Result<f64> {
    same_len("freq_loss", x_out.len(), y_out.len())?;
    let (a, b) = (plan.compute(x_out)?, plan.compute(y_out)?);
    Ok(a.data().iter().zip(b.data()).map(|(p, q)| (p - q).powi(2)).sum::<f64>() / a.len() as f64)
}

pub fn emb_loss_on(tape: &mut Tape, x_e: Var, y_h: Var) -> Result<Var> {
    let d = tape.sub(x_e, y_h).map_err(|e| relabel(e, "emb_loss"))?;
    Ok(tape.abs_mean(d))
}

pub fn time_loss_on(tape: &mut Tape, x_out: Var, y_out: Var) -> Result<Var> {
    let d = tape.sub(x_out, y_out).map_err(|e| relabel(e, "time_loss"))?;
    Ok(tape.abs_mean(d))
}

/// Mel distance against a precomputed target spectrogram.
pub fn freq_loss_on(tape: &mut Tape, target_mel: &Tensor, y_out: Var, plan: &MelPlan) -> Result<Var> {
    let m = plan.on_tape(tape, y_out)?;
    let t = tape.constant(target_mel);
    let d = tape.sub(m, t).map_err(|e| relabel(e, "freq_loss"))?;
    Ok(tape.sq_mean(d))
}

/// Same arithmetic path as [`overall_loss`].
pub fn overall_on(tape: &mut Tape, l_emb: Var, l_time: Var, l_freq: Var, w: &LossWeights) -> Result<Var> {
    let a = tape.scale(l_emb, w.alpha);
    let b = tape.scale(l_time, w.beta);
    let c = tape.scale(l_freq, w.gamma);
    let ab = tape.add(a, b)?;
    tape.add(ab, c)
}

fn relabel(e: Error, op: &'static str) -> Error {
    match e {
        Error::Shape { detail, .. } => Error::Shape { op, detail },
        other => other,
    }
}

/// Clean-side training targets: the latent and the codec-transmitted waveform.
#[derive(Clone, Debug, PartialEq)]
pub struct Targets {
    pub x_e: Tensor,
    pub x_out: Vec<f64>,
}

/// `x_e = encode(x_in)`, `x_out = decode(quantize(x_e))` truncated to the input length.
pub fn make_targets(x_in: &[f64], codec: &CodecModel) -> Result<Targets> {
    let x_e = codec.encode(x_in)?;
    let q = codec.quantize(&x_e)?;
    let mut x_out = codec.decode(&q.quantized)?;
    x_out.truncate(x_in.len());
    Ok(Targets { x_e, x_out })
}

/// One row of the loss history.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    #[serde(flatten)]
    pub loss: LossBreakdown,
}

pub const HISTORY_HEADER: &str = "epoch,l_emb,l_time,l_freq,l_overall";

pub fn history_csv(rows: &[EpochLoss]) -> String {
    let mut s = format!("{HISTORY_HEADER}\n");
    for r in rows {
        let l = &r.loss;
        let _ = writeln!(s, "{},{},{},{},{}", r.epoch, l.l_emb, l.l_time, l.l_freq, l.l_overall);
    }
    s
}

pub fn write_history_csv(path: &Path, rows: &[EpochLoss]) -> Result<()> {
    crate::io::write_bytes_atomic(path, history_csv(rows).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::MelConfig;
    use proptest::prelude::*;

    #[test]
    fn weighted_sum_example() {
        let w = LossWeights::default();
        assert_eq!(overall_loss(1.0, 0.002, 11.0, &w), 3.0);
        assert_eq!(overall_loss(0.0, 0.0, 0.0, &w), 0.0);
        assert_eq!(overall_loss(2.0, 0.0, 0.0, &w), 2.0);
    }

    #[test]
    fn tape_total_matches_value_path() {
        let w = LossWeights::default();
        let mut tape = Tape::new();
        let parts = [0.37, 0.0021, 4.9].map(|v| tape.constant(&Tensor::scalar(v)));
        let t = overall_on(&mut tape, parts[0], parts[1], parts[2], &w).unwrap();
        assert_eq!(tape.scalar(t), overall_loss(0.37, 0.0021, 4.9, &w));
    }

    #[test]
    fn component_examples() {
        let ones = Tensor::full(vec![2, 3], 1.0);
        let zeros = Tensor::zeros(vec![2, 3]);
        assert_eq!(emb_loss(&ones, &ones).unwrap(), 0.0);
        assert_eq!(emb_loss(&ones, &zeros).unwrap(), 1.0);
        assert_eq!(time_loss(&[0.5; 8], &[0.0; 8]).unwrap(), 0.5);
        assert!(emb_loss(&ones, &Tensor::zeros(vec![3, 2])).is_err());
        assert!(time_loss(&[0.0; 3], &[0.0; 4]).is_err());
    }

    #[test]
    fn emb_loss_matches_hand_sum() {
        let a = Tensor::new(vec![3, 4], (0..12).map(|i| (i as f64 * 0.7).sin()).collect()).unwrap();
        let b = Tensor::new(vec![3, 4], (0..12).map(|i| (i as f64 * 1.3).cos()).collect()).unwrap();
        let mut total = 0.0;
        for i in 0..3 {
            for j in 0..4 {
                total += (a.at2(i, j) - b.at2(i, j)).abs();
            }
        }
        assert!((emb_loss(&a, &b).unwrap() - total / 12.0).abs() < 1e-15);
    }

    #[test]
    fn freq_loss_of_tone_against_silence() {
        let cfg = MelConfig::default();
        let plan = MelPlan::new(&cfg).unwrap();
        let tone: Vec<f64> = (0..4096).map(|i| (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / 16_000.0).sin()).collect();
        let silence = vec![0.0; 4096];
        let m = plan.compute(&tone).unwrap();
        let expect = m.data().iter().map(|v| v * v).sum::<f64>() / m.len() as f64;
        let got = freq_loss(&tone, &silence, &plan).unwrap();
        assert!((got - expect).abs() <= 1e-12 * expect);
        assert_eq!(freq_loss(&silence, &silence, &plan).unwrap(), 0.0);
        assert_eq!(freq_loss(&tone, &tone, &plan).unwrap(), 0.0);
        assert!(freq_loss(&tone[..100], &silence[..100], &plan).is_err());
    }

    #[test]
    fn history_csv_layout() {
        let rows = [EpochLoss { epoch: 1, loss: LossBreakdown::new(0.5, 0.25, 2.0, &LossWeights::default()) }];
        let csv = history_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(HISTORY_HEADER));
        assert!(lines.next().unwrap().starts_with("1,0.5,0.25,2,"));
    }

    proptest! {
        #[test]
        fn linear_nonnegative_symmetric(e in 0.0..10.0f64, t in 0.0..1.0f64, f in 0.0..100.0f64, seed in any::<u64>()) {
            let w = LossWeights::default();
            prop_assert!(overall_loss(e, t, f, &w) >= 0.0);
            let single = [(e, 0.0, 0.0), (0.0, t, 0.0), (0.0, 0.0, f)];
            for (a, b, c) in single {
                prop_assert_eq!(overall_loss(2.0 * a, 2.0 * b, 2.0 * c, &w), 2.0 * overall_loss(a, b, c, &w));
            }
            let mut r = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
            let x = Tensor::randn(vec![3, 5], 1.0, &mut r);
            let y = Tensor::randn(vec![3, 5], 1.0, &mut r);
            prop_assert_eq!(emb_loss(&x, &y).unwrap(), emb_loss(&y, &x).unwrap());
            prop_assert!(emb_loss(&x, &y).unwrap() >= 0.0);
            prop_assert_eq!(time_loss(x.data(), y.data()).unwrap(), time_loss(y.data(), x.data()).unwrap());
        }
    }
}
