use super::*;
use crate::codec::{CodecConfig, CodecModel};
use crate::data::{Corpus, CorpusConfig};
use crate::dsp::{MelConfig, MelPlan};
use crate::losses::LossWeights;
use crate::se::{SEConfig, SEModel};

fn tiny_codec() -> CodecModel {
    CodecModel::new(CodecConfig {
        strides: vec![2, 4],
        base_channels: 2,
        latent_dim: 4,
        n_codebooks: 2,
        codebook_size: 4,
        ..Default::default()
    })
    .unwrap()
}

fn tiny_se(seed: u64) -> SEModel {
    SEModel::new(SEConfig { n_blocks: 1, emb: 8, n_heads: 2, ffn_mult: 2, seed, ..Default::default() }, 4).unwrap()
}

fn tiny_corpus() -> Corpus {
    Corpus::new(CorpusConfig { n_utterances: 12, crop_seconds: 0.02, validation_every: 4, ..Default::default() }).unwrap()
}

fn tiny_mel() -> MelConfig {
    MelConfig { n_fft: 128, hop: 32, n_mels: 16, ..Default::default() }
}

fn tiny_cfg(epochs: usize) -> TrainConfig {
    TrainConfig {
        lr: 1e-3,
        epochs,
        batch_size: 2,
        weights: LossWeights { alpha: 1.0, beta: 2.0, gamma: 0.5 },
        mel: tiny_mel(),
        ..Default::default()
    }
}

#[test]
fn ablation_arms_zero_the_right_terms() {
    let w = LossWeights::default();
    let e = Ablation::EmbOnly.weights(&w);
    assert_eq!((e.alpha, e.beta, e.gamma), (w.alpha, 0.0, 0.0));
    let t = Ablation::TimeFreqOnly.weights(&w);
    assert_eq!((t.alpha, t.beta, t.gamma), (0.0, w.beta, w.gamma));
    assert_eq!(Ablation::All.weights(&w), w);
    assert_eq!(serde_json::to_string(&Ablation::TimeFreqOnly).unwrap(), "\"time_freq_only\"");
}

#[test]
fn zero_epochs_leave_model_unchanged() {
    let codec = tiny_codec();
    let se = tiny_se(1);
    let out = train_se(&codec, se.clone(), &tiny_corpus(), &tiny_cfg(0)).unwrap();
    assert_eq!(out.model.params().value_bits(), se.params().value_bits());
    assert_eq!(out.history.len(), 1);
    assert!(out.history[0].train.is_none());
}

#[test]
fn training_leaves_codec_bits_and_is_deterministic() {
    let codec = tiny_codec();
    let before = codec.params().value_bits();
    let corpus = tiny_corpus();
    let a = train_se(&codec, tiny_se(2), &corpus, &tiny_cfg(2)).unwrap();
    let b = train_se(&codec, tiny_se(2), &corpus, &tiny_cfg(2)).unwrap();
    assert_eq!(codec.params().value_bits(), before);
    assert_eq!(a.model.params().value_bits(), b.model.params().value_bits());
    assert_eq!(a.history, b.history);
    assert_eq!(a.history.len(), 3);
    assert_ne!(a.model.params().value_bits(), tiny_se(2).params().value_bits());
}

#[test]
fn emb_only_arm_still_reports_decoder_losses() {
    let codec = tiny_codec();
    let cfg = TrainConfig { ablation: Ablation::EmbOnly, ..tiny_cfg(1) };
    let out = train_se(&codec, tiny_se(3), &tiny_corpus(), &cfg).unwrap();
    let t = out.history[1].train.unwrap();
    assert!(t.l_time > 0.0 && t.l_freq > 0.0);
    assert_eq!(t.l_overall, t.l_emb);
}

#[test]
fn invalid_configs_are_rejected() {
    for cfg in [
        TrainConfig { lr: 0.0, ..tiny_cfg(1) },
        TrainConfig { batch_size: 0, ..tiny_cfg(1) },
        TrainConfig { grad_clip: Some(-1.0), ..tiny_cfg(1) },
    ] {
        assert!(train_se(&tiny_codec(), tiny_se(0), &tiny_corpus(), &cfg).is_err());
    }
}

#[test]
fn checkpoints_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig { checkpoint_dir: Some(dir.path().into()), checkpoint_every: 1, ..tiny_cfg(2) };
    train_se(&tiny_codec(), tiny_se(4), &tiny_corpus(), &cfg).unwrap();
    for f in ["se_epoch1.ckpt", "se_epoch2.ckpt"] {
        let p = crate::pipeline::Pipeline::load(dir.path().join(f)).unwrap();
        assert_eq!(p.se.latent_dim(), 4);
    }
}

#[test]
fn evaluating_clean_input_reports_cap_and_zero_mel() {
    let codec = tiny_codec();
    let corpus = tiny_corpus();
    let clean = corpus.clean(0).unwrap();
    let plan = MelPlan::new(&tiny_mel()).unwrap();
    let r = evaluate(&codec, &tiny_se(5), &[(clean.clone(), clean)], &plan).unwrap();
    assert_eq!(r.utterances.len(), 1);
    assert!(r.utterances[0].mel_distance >= 0.0);
    assert!(r.median_si_snr_improvement.is_finite());
}

#[test]
fn ablation_arms_share_initial_weights() {
    let cfg = tiny_cfg(1);
    let se_cfg = SEConfig { n_blocks: 1, emb: 8, n_heads: 2, ffn_mult: 2, seed: 6, ..Default::default() };
    let r = run_ablation(&tiny_codec(), &se_cfg, &tiny_corpus(), &cfg).unwrap();
    assert_eq!(r.rows.len(), 3);
    let init: Vec<_> = r.outcomes.iter().map(|o| o.history[0].val).collect();
    assert!(init.iter().all(|v| v.l_emb == init[0].l_emb && v.l_time == init[0].l_time));
    let csv = r.csv();
    assert!(csv.starts_with(ABLATION_HEADER));
    assert_eq!(csv.lines().count(), 4);
}
