//! Pretrains a small codec on synthetic speech and reports round-trip quality.
//!
//! cargo run --release --example codec_pretrain -- [epochs] [utterances]

use std::time::Instant;

use latent_se::codec::{evaluate_reconstruction, pretrain_codec, CodecConfig, PretrainConfig};
use latent_se::data::{gen_clean, Corpus, CorpusConfig, SourceKind, UtteranceSpec};
use latent_se::dsp::MelPlan;

fn main() -> latent_se::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LOG_LEVEL", "info")).init();
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let epochs = args.next().unwrap_or(10);
    let n = args.next().unwrap_or(200);

    let corpus = Corpus::new(CorpusConfig { n_utterances: n, ..Default::default() })?;
    let pcfg = PretrainConfig { epochs, ..Default::default() };
    let plan = MelPlan::new(&pcfg.mel)?;
    let held_out: Vec<Vec<f64>> = corpus.validation_indices().iter().map(|&i| corpus.clean(i)).collect::<Result<_, _>>()?;

    let (init, _) = pretrain_codec(CodecConfig::default(), &PretrainConfig { epochs: 0, ..pcfg.clone() }, &corpus)?;
    let before = evaluate_reconstruction(&init, &held_out, &plan)?;

    let t0 = Instant::now();
    let (codec, history) = pretrain_codec(CodecConfig::default(), &pcfg, &corpus)?;
    let secs = t0.elapsed().as_secs_f64();
    let after = evaluate_reconstruction(&codec, &held_out, &plan)?;

    let tone = gen_clean(&UtteranceSpec::new(999, 0.5, 16_000, SourceKind::ToneStack { f0: 220.0, harmonics: 1 })?)?;
    let tone_after = evaluate_reconstruction(&codec, &[tone], &plan)?;

    println!("trained {epochs} epochs on {} utterances in {secs:.1} s", corpus.train_indices().len());
    if let (Some(a), Some(b)) = (history.first(), history.last()) {
        println!("train loss {:.4} -> {:.4}", a.total, b.total);
    }
    println!("held-out mel  {:.4} -> {:.4}", before.mel, after.mel);
    println!("held-out l1   {:.4} -> {:.4}", before.l1, after.l1);
    println!("held-out SI-SNR median {:.2} dB -> {:.2} dB", before.si_snr_median, after.si_snr_median);
    println!("pure tone SI-SNR {:.2} dB", tone_after.si_snr_median);
    Ok(())
}
