use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{CodecConfig, PretrainConfig};
use super::model::CodecModel;
use crate::autodiff::{Tape, Tensor};
use crate::data::{derive_seed, Corpus};
use crate::dsp::{si_snr, MelPlan};
use crate::error::{Error, Result};
use crate::train::{Adam, AdamConfig};

/// Mean training losses over one pretraining epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretrainRecord {
    pub epoch: usize,
    pub l1: f64,
    pub mel: f64,
    pub commit: f64,
    pub codebook: f64,
    pub total: f64,
}

/// Reconstruction quality of encode → quantize → decode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionMetrics {
    pub l1: f64,
    pub mel: f64,
    pub si_snr_median: f64,
}

struct SampleResult {
    grads: Vec<Vec<f64>>,
    losses: [f64; 5],
}

fn sample_step(
    model: &CodecModel,
    plan: &MelPlan,
    pcfg: &PretrainConfig,
    quantize: bool,
    clean: &[f64],
    mel_target: &Tensor,
) -> Result<SampleResult> {
    let mut tape = Tape::new();
    let p = model.params().bind(&mut tape, true);
    let x = tape.constant_from(vec![1, clean.len()], clean.to_vec())?;
    let latent = model.encode_on(&mut tape, &p, x)?;
    let (tq, q) = model.quantize_on(&mut tape, latent)?;
    let y = model.decode_on(&mut tape, &p, if quantize { tq.quantized } else { latent })?;

    let xc = tape.constant_from(vec![clean.len()], clean.to_vec())?;
    let d = tape.sub(y, xc)?;
    let l1 = tape.abs_mean(d);
    let my = plan.on_tape(&mut tape, y)?;
    let mt = tape.constant(mel_target);
    let dm = tape.sub(my, mt)?;
    let mel = tape.sq_mean(dm);
    let cb = model.codebook_loss_on(&mut tape, &p, &q)?;

    let (wc, wb) = if quantize { (pcfg.commitment_weight, pcfg.codebook_weight) } else { (0.0, 0.0) };
    let parts = [(l1, pcfg.l1_weight), (mel, pcfg.mel_weight), (tq.commit_loss, wc), (cb, wb)];
    let mut total = tape.scale(parts[0].0, parts[0].1);
    for &(v, w) in &parts[1..] {
        let s = tape.scale(v, w);
        total = tape.add(total, s)?;
    }
    let losses = [tape.scalar(l1), tape.scalar(mel), tape.scalar(tq.commit_loss), tape.scalar(cb), tape.scalar(total)];
    if losses.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: format!("codec pretraining loss {losses:?}") });
    }
    let g = tape.backward(total)?;
    let grads = p.vars().iter().map(|&v| g.get_or_zeros(&tape, v)).collect();
    Ok(SampleResult { grads, losses })
}

/// Replaces codewords `1..K` of every stage with residual frames drawn from
/// `latents`, so each stage starts inside the data distribution.
pub fn init_codebooks(model: &mut CodecModel, latents: &[Tensor], seed: u64) -> Result<()> {
    let d = model.config().latent_dim;
    let k = model.config().codebook_size;
    let mut frames: Vec<Vec<f64>> = Vec::new();
    for l in latents {
        let t = l.shape()[1];
        for j in 0..t {
            frames.push((0..d).map(|i| l.data()[i * t + j]).collect());
        }
    }
    if frames.is_empty() {
        return Err(Error::arg("init_codebooks", "no latent frames"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for id in model.rvq().ids().to_vec() {
        let picks: Vec<usize> = (1..k).map(|_| rand::Rng::gen_range(&mut rng, 0..frames.len())).collect();
        {
            let cb = model.params_mut().get_mut(id).data_mut();
            for (c, &f) in picks.iter().enumerate() {
                cb[(c + 1) * d..(c + 2) * d].copy_from_slice(&frames[f]);
            }
        }
        // residuals for the next stage
        let cb = model.params().get(id).detached();
        for f in &mut frames {
            let mut best = 0;
            let mut bd = f64::INFINITY;
            for c in 0..k {
                let dist: f64 = f.iter().zip(&cb.data()[c * d..(c + 1) * d]).map(|(a, b)| (a - b).powi(2)).sum();
                if dist < bd {
                    bd = dist;
                    best = c;
                }
            }
            f.iter_mut().zip(&cb.data()[best * d..(best + 1) * d]).for_each(|(a, b)| *a -= b);
        }
    }
    Ok(())
}

/// Trains a fresh codec on the clean training utterances of `corpus`.
///
/// With `pcfg.epochs == 0` the freshly initialized model is returned as is.
pub fn pretrain_codec(config: CodecConfig, pcfg: &PretrainConfig, corpus: &Corpus) -> Result<(CodecModel, Vec<PretrainRecord>)> {
    pcfg.validate()?;
    let mut model = CodecModel::new(config)?;
    if pcfg.epochs == 0 {
        return Ok((model, Vec::new()));
    }
    let train = corpus.train_indices().to_vec();
    if train.is_empty() {
        return Err(Error::arg("pretrain_codec", "corpus has no training utterances"));
    }
    let plan = MelPlan::new(&pcfg.mel)?;
    let clean: Vec<Vec<f64>> = train.par_iter().map(|&i| corpus.clean(i).and_then(|w| model.pad(&w))).collect::<Result<_>>()?;
    let mels: Vec<Tensor> = clean.par_iter().map(|w| plan.compute(w)).collect::<Result<_>>()?;

    let mut adam = Adam::new(model.params(), AdamConfig::default());
    let mut history = Vec::with_capacity(pcfg.epochs);
    let mut order: Vec<usize> = (0..clean.len()).collect();
    for epoch in 0..pcfg.epochs {
        if epoch == pcfg.warmup_epochs {
            let init: Vec<Tensor> = clean.par_iter().take(64).map(|w| model.encode(w)).collect::<Result<_>>()?;
            init_codebooks(&mut model, &init, derive_seed(pcfg.seed, epoch as u64, u64::MAX))?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(pcfg.seed, epoch as u64, 0));
        order.shuffle(&mut rng);
        let mut sums = [0.0; 5];
        for batch in order.chunks(pcfg.batch_size) {
            let results: Vec<SampleResult> = batch
                .par_iter()
                .map(|&i| sample_step(&model, &plan, pcfg, epoch >= pcfg.warmup_epochs, &clean[i], &mels[i]))
                .collect::<Result<_>>()?;
            let scale = 1.0 / batch.len() as f64;
            model.params_mut().zero_grad();
            for r in &results {
                for (id, g) in model.params().ids().zip(&r.grads).collect::<Vec<_>>() {
                    let g: Vec<f64> = g.iter().map(|v| v * scale).collect();
                    model.params_mut().get_mut(id).accumulate_grad(&g);
                }
                for (s, l) in sums.iter_mut().zip(r.losses) {
                    *s += l;
                }
            }
            log::debug!(
                "step {}: total {:.5} l1 {:.5}",
                adam.steps(),
                results.iter().map(|r| r.losses[4]).sum::<f64>() * scale,
                results.iter().map(|r| r.losses[0]).sum::<f64>() * scale
            );
            model.apply_constraints(true);
            adam.step(model.params_mut(), pcfg.lr)?;
            model.apply_constraints(false);
        }
        let n = clean.len() as f64;
        let rec = PretrainRecord {
            epoch: epoch + 1,
            l1: sums[0] / n,
            mel: sums[1] / n,
            commit: sums[2] / n,
            codebook: sums[3] / n,
            total: sums[4] / n,
        };
        log::info!("codec epoch {}: l1 {:.5} mel {:.5} commit {:.5} total {:.5}", rec.epoch, rec.l1, rec.mel, rec.commit, rec.total);
        history.push(rec);
    }
    model.params_mut().zero_grad();
    model.params_mut().round_to_f32();
    Ok((model, history))
}

/// Mean L1 and mel distance and median SI-SNR of full codec round trips.
pub fn evaluate_reconstruction(model: &CodecModel, waves: &[Vec<f64>], plan: &MelPlan) -> Result<ReconstructionMetrics> {
    let per: Vec<(f64, f64, f64)> = waves
        .par_iter()
        .map(|w| {
            let y = model.reconstruct(w)?;
            let l1 = w.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum::<f64>() / w.len() as f64;
            let (mx, my) = (plan.compute(w)?, plan.compute(&y)?);
            let mel = mx.data().iter().zip(my.data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / mx.len() as f64;
            Ok((l1, mel, si_snr(w, &y)?))
        })
        .collect::<Result<_>>()?;
    let n = per.len().max(1) as f64;
    let s: Vec<f64> = per.iter().map(|p| p.2).collect();
    Ok(ReconstructionMetrics {
        l1: per.iter().map(|p| p.0).sum::<f64>() / n,
        mel: per.iter().map(|p| p.1).sum::<f64>() / n,
        si_snr_median: crate::dsp::median(&s),
    })
}
