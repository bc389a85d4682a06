use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use crate::autodiff::{Tape, Tensor};
use crate::codec::CodecModel;
use crate::data::{Corpus, MixturePair};
use crate::dsp::{median, si_snr, MelConfig, MelPlan};
use crate::error::{Error, Result};
use crate::losses::{
    emb_loss, emb_loss_on, freq_loss, freq_loss_on, make_targets, overall_on, time_loss, time_loss_on, EpochLoss,
    LossBreakdown, LossWeights,
};
use crate::pipeline::Pipeline;
use crate::se::SEModel;

/// Which loss terms drive training.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    EmbOnly,
    TimeFreqOnly,
    #[default]
    All,
}

impl Ablation {
    pub const ARMS: [Ablation; 3] = [Ablation::EmbOnly, Ablation::TimeFreqOnly, Ablation::All];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::EmbOnly => "emb_only",
            Ablation::TimeFreqOnly => "time_freq_only",
            Ablation::All => "all",
        }
    }

    /// Weights with the disabled terms zeroed.
    pub fn weights(self, base: &LossWeights) -> LossWeights {
        match self {
            Ablation::EmbOnly => LossWeights { beta: 0.0, gamma: 0.0, ..*base },
            Ablation::TimeFreqOnly => LossWeights { alpha: 0.0, ..*base },
            Ablation::All => *base,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub weights: LossWeights,
    pub ablation: Ablation,
    pub adam: AdamConfig,
    /// Global gradient-norm clip; off when `None`.
    pub grad_clip: Option<f64>,
    /// Cosine decay of the learning rate to zero over the run.
    pub cosine_lr: bool,
    /// Set from the run-level mel section when loaded from a run config.
    #[serde(skip)]
    pub mel: MelConfig,
    /// Writes `se_epoch{N}.ckpt` every `checkpoint_every` epochs and
    /// `se_best.ckpt` on each validation improvement.
    pub checkpoint_dir: Option<PathBuf>,
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1.5e-4,
            epochs: 70,
            batch_size: 4,
            seed: 0,
            weights: LossWeights::default(),
            ablation: Ablation::All,
            adam: AdamConfig::default(),
            grad_clip: None,
            cosine_lr: false,
            mel: MelConfig::default(),
            checkpoint_dir: None,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || self.batch_size == 0 {
            return Err(Error::Config(format!("train: lr {} and batch_size {} must be positive", self.lr, self.batch_size)));
        }
        if self.grad_clip.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::Config("train: grad_clip must be > 0".into()));
        }
        self.weights.validate()?;
        self.mel.validate()
    }

    fn lr_at(&self, epoch: usize) -> f64 {
        if self.cosine_lr && self.epochs > 0 {
            0.5 * self.lr * (1.0 + (std::f64::consts::PI * epoch as f64 / self.epochs as f64).cos())
        } else {
            self.lr
        }
    }
}

/// Losses of one epoch: the training mean and the validation mean after it.
/// Epoch 0 holds the validation losses of the untrained model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train: Option<LossBreakdown>,
    pub val: LossBreakdown,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: SEModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl TrainOutcome {
    pub fn train_losses(&self) -> Vec<EpochLoss> {
        self.history.iter().filter_map(|r| r.train.map(|loss| EpochLoss { epoch: r.epoch, loss })).collect()
    }

    pub fn val_losses(&self) -> Vec<EpochLoss> {
        self.history.iter().map(|r| EpochLoss { epoch: r.epoch, loss: r.val }).collect()
    }
}

struct SampleResult {
    grads: Vec<Vec<f64>>,
    loss: LossBreakdown,
}

fn sample_step(codec: &CodecModel, se: &SEModel, plan: &MelPlan, w: &LossWeights, pair: &MixturePair) -> Result<SampleResult> {
    let targets = make_targets(&pair.clean, codec)?;
    let y_e = codec.encode(&pair.noisy)?;
    let mut tape = Tape::new();
    let p = se.params().bind(&mut tape, true);
    let ye = tape.constant(&y_e);
    let yh = se.forward_on(&mut tape, &p, ye)?;
    let xe = tape.constant(&targets.x_e);
    let l_emb = emb_loss_on(&mut tape, xe, yh)?;

    let (l_time, l_freq, total);
    if w.beta > 0.0 || w.gamma > 0.0 {
        let cp = codec.params().bind(&mut tape, false);
        let (q, _) = codec.quantize_on(&mut tape, yh)?;
        let y = codec.decode_on(&mut tape, &cp, q.quantized)?;
        let hop_len = tape.shape(y)[0];
        let mut x_pad = targets.x_out.clone();
        x_pad.resize(hop_len, 0.0);
        let xo = tape.constant_from(vec![hop_len], x_pad.clone())?;
        let lt = time_loss_on(&mut tape, xo, y)?;
        let lf = freq_loss_on(&mut tape, &plan.compute(&x_pad)?, y, plan)?;
        let t = overall_on(&mut tape, l_emb, lt, lf, w)?;
        (l_time, l_freq, total) = (tape.scalar(lt), tape.scalar(lf), t);
    } else {
        // Decoder terms carry zero weight; evaluate them without a gradient path.
        let q = codec.quantize(&tape.tensor(yh))?;
        let mut y = codec.decode(&q.quantized)?;
        y.truncate(pair.clean.len());
        l_time = time_loss(&targets.x_out, &y)?;
        l_freq = freq_loss(&targets.x_out, &y, plan)?;
        let zero = tape.constant(&Tensor::scalar(0.0));
        total = overall_on(&mut tape, l_emb, zero, zero, w)?;
    }
    let loss = LossBreakdown { l_emb: tape.scalar(l_emb), l_time, l_freq, l_overall: tape.scalar(total) };
    if !loss.l_overall.is_finite() {
        return Err(Error::NonFinite { context: format!("SE training loss {loss:?}") });
    }
    let g = tape.backward(total)?;
    let grads = p.vars().iter().map(|&v| g.get_or_zeros(&tape, v)).collect();
    Ok(SampleResult { grads, loss })
}

fn mean_breakdown(parts: &[LossBreakdown], w: &LossWeights) -> LossBreakdown {
    let n = parts.len().max(1) as f64;
    let l_emb = parts.iter().map(|l| l.l_emb).sum::<f64>() / n;
    let l_time = parts.iter().map(|l| l.l_time).sum::<f64>() / n;
    let l_freq = parts.iter().map(|l| l.l_freq).sum::<f64>() / n;
    LossBreakdown::new(l_emb, l_time, l_freq, w)
}

/// Per-utterance evaluation of the enhancement pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtteranceEval {
    /// SI-SNR of the noisy input against the codec-transmitted clean target.
    pub si_snr_noisy: f64,
    pub si_snr_enhanced: f64,
    pub si_snr_improvement: f64,
    pub mel_distance: f64,
    pub latent_l1: f64,
    pub time_l1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub utterances: Vec<UtteranceEval>,
    pub median_si_snr_improvement: f64,
    pub mean_mel_distance: f64,
    pub mean_latent_l1: f64,
}

impl EvalReport {
    pub fn breakdown(&self, w: &LossWeights) -> LossBreakdown {
        let parts: Vec<LossBreakdown> = self
            .utterances
            .iter()
            .map(|u| LossBreakdown { l_emb: u.latent_l1, l_time: u.time_l1, l_freq: u.mel_distance, l_overall: 0.0 })
            .collect();
        mean_breakdown(&parts, w)
    }
}

/// Scores `(clean, noisy)` pairs: targets come from passing `clean` through the codec.
pub fn evaluate(codec: &CodecModel, se: &SEModel, pairs: &[(Vec<f64>, Vec<f64>)], plan: &MelPlan) -> Result<EvalReport> {
    let pipe = Pipeline::new(codec.clone(), se.clone())?;
    let utterances: Vec<UtteranceEval> = pairs
        .par_iter()
        .map(|(clean, noisy)| {
            if clean.len() != noisy.len() {
                return Err(Error::shape("evaluate", format!("clean {} vs noisy {} samples", clean.len(), noisy.len())));
            }
            let t = make_targets(clean, codec)?;
            let e = pipe.enhance(noisy)?;
            let before = si_snr(&t.x_out, noisy)?;
            let after = si_snr(&t.x_out, &e.wave)?;
            Ok(UtteranceEval {
                si_snr_noisy: before,
                si_snr_enhanced: after,
                si_snr_improvement: after - before,
                mel_distance: freq_loss(&t.x_out, &e.wave, plan)?,
                latent_l1: emb_loss(&t.x_e, &e.y_h)?,
                time_l1: time_loss(&t.x_out, &e.wave)?,
            })
        })
        .collect::<Result<_>>()?;
    let n = utterances.len().max(1) as f64;
    Ok(EvalReport {
        median_si_snr_improvement: median(&utterances.iter().map(|u| u.si_snr_improvement).collect::<Vec<_>>()),
        mean_mel_distance: utterances.iter().map(|u| u.mel_distance).sum::<f64>() / n,
        mean_latent_l1: utterances.iter().map(|u| u.latent_l1).sum::<f64>() / n,
        utterances,
    })
}

pub fn mixture_pairs(pairs: &[MixturePair]) -> Vec<(Vec<f64>, Vec<f64>)> {
    pairs.iter().map(|p| (p.clean.clone(), p.noisy.clone())).collect()
}

fn global_norm(grads: &[Vec<f64>]) -> f64 {
    grads.iter().flatten().map(|g| g * g).sum::<f64>().sqrt()
}

/// Trains `se` on `corpus` mixtures against targets from the frozen `codec`.
pub fn train_se(codec: &CodecModel, mut se: SEModel, corpus: &Corpus, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if codec.config().latent_dim != se.latent_dim() {
        return Err(Error::Config("codec and SE latent widths differ".into()));
    }
    let codec_bits = codec.params().value_bits();
    let w = cfg.ablation.weights(&cfg.weights);
    let plan = MelPlan::new(&cfg.mel)?;
    let val = mixture_pairs(&corpus.validation_set()?);
    let val_loss = |se: &SEModel| -> Result<LossBreakdown> {
        if val.is_empty() {
            return Ok(LossBreakdown::new(0.0, 0.0, 0.0, &w));
        }
        Ok(evaluate(codec, se, &val, &plan)?.breakdown(&w))
    };

    let mut history = vec![EpochRecord { epoch: 0, train: None, val: val_loss(&se)? }];
    let mut best = (history[0].val.l_overall, 0);
    let mut adam = Adam::new(se.params(), cfg.adam);
    for epoch in 1..=cfg.epochs {
        let lr = cfg.lr_at(epoch - 1);
        let mut seen = Vec::new();
        for idx in corpus.epoch_batches(epoch as u64, cfg.batch_size) {
            let pairs: Vec<MixturePair> = idx.iter().map(|&i| corpus.mixture(i, epoch as u64)).collect::<Result<_>>()?;
            let results: Vec<SampleResult> =
                pairs.par_iter().map(|p| sample_step(codec, &se, &plan, &w, p)).collect::<Result<_>>()?;
            let scale = 1.0 / results.len() as f64;
            let mut grads: Vec<Vec<f64>> = se.params().iter().map(|(_, t)| vec![0.0; t.len()]).collect();
            for r in &results {
                for (acc, g) in grads.iter_mut().zip(&r.grads) {
                    acc.iter_mut().zip(g).for_each(|(a, b)| *a += b * scale);
                }
                seen.push(r.loss);
            }
            if let Some(c) = cfg.grad_clip {
                let n = global_norm(&grads);
                if n > c {
                    grads.iter_mut().flatten().for_each(|g| *g *= c / n);
                }
            }
            se.params_mut().zero_grad();
            for (id, g) in se.params().ids().collect::<Vec<_>>().into_iter().zip(&grads) {
                se.params_mut().get_mut(id).accumulate_grad(g);
            }
            adam.step(se.params_mut(), lr)?;
        }
        let rec = EpochRecord { epoch, train: Some(mean_breakdown(&seen, &w)), val: val_loss(&se)? };
        log::info!(
            "[{}] epoch {epoch}: train {:.5} val l_emb {:.5} l_time {:.5} l_freq {:.5}",
            cfg.ablation.name(),
            rec.train.map_or(f64::NAN, |t| t.l_overall),
            rec.val.l_emb,
            rec.val.l_time,
            rec.val.l_freq
        );
        if let Some(dir) = &cfg.checkpoint_dir {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let snapshot = || -> Result<Pipeline> {
                let mut s = se.clone();
                s.params_mut().round_to_f32();
                Pipeline::new(codec.clone(), s)
            };
            if cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 {
                snapshot()?.save(dir.join(format!("se_epoch{epoch}.ckpt")))?;
            }
            if rec.val.l_overall < best.0 {
                snapshot()?.save(dir.join("se_best.ckpt"))?;
            }
        }
        if rec.val.l_overall < best.0 {
            best = (rec.val.l_overall, epoch);
        }
        history.push(rec);
    }
    se.params_mut().zero_grad();
    if cfg.epochs > 0 {
        se.params_mut().round_to_f32();
    }
    assert_eq!(codec.params().value_bits(), codec_bits, "codec parameters changed during SE training");
    Ok(TrainOutcome { model: se, history, best_epoch: best.1 })
}
