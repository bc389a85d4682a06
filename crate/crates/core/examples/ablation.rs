//! Trains three SE models that differ only in which loss terms are active and
//! prints the comparison table.
//!
//! cargo run --release --example ablation -- [codec_epochs] [se_epochs]

use latent_se::codec::{pretrain_codec, CodecConfig, PretrainConfig};
use latent_se::data::{Corpus, CorpusConfig};
use latent_se::losses::LossWeights;
use latent_se::se::SEConfig;
use latent_se::train::{run_ablation, TrainConfig};

fn main() -> latent_se::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LOG_LEVEL", "info")).init();
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let codec_epochs = args.next().unwrap_or(15);
    let se_epochs = args.next().unwrap_or(20);

    let corpus = Corpus::new(CorpusConfig::default())?;
    let (codec, _) = pretrain_codec(CodecConfig::default(), &PretrainConfig { epochs: codec_epochs, ..Default::default() }, &corpus)?;
    let cfg = TrainConfig {
        lr: 1e-3,
        epochs: se_epochs,
        weights: LossWeights { alpha: 1.0, beta: 2.5, gamma: 0.5 },
        ..Default::default()
    };
    let se = SEConfig { n_blocks: 2, emb: 64, ..Default::default() };
    let result = run_ablation(&codec, &se, &corpus, &cfg)?;

    println!("{:<16} {:>12} {:>12} {:>14} {:>10}", "arm", "initial l_emb", "final l_emb", "SI-SNR impr.", "mel dist");
    for r in &result.rows {
        println!(
            "{:<16} {:>12.4} {:>12.4} {:>13.2} dB {:>10.4}",
            r.arm.name(),
            r.initial_val_l_emb,
            r.val_l_emb,
            r.si_snr_improvement,
            r.mel_distance
        );
    }
    Ok(())
}
