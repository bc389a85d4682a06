//! Pretrains a codec, trains a small SE model against it with the codec frozen,
//! and saves the pipeline.
//!
//! cargo run --release --example train_se -- [codec_epochs] [se_epochs] [out.ckpt]

use latent_se::codec::{pretrain_codec, CodecConfig, PretrainConfig};
use latent_se::data::{Corpus, CorpusConfig};
use latent_se::dsp::MelPlan;
use latent_se::losses::LossWeights;
use latent_se::pipeline::Pipeline;
use latent_se::se::{SEConfig, SEModel};
use latent_se::train::{evaluate, mixture_pairs, train_se, TrainConfig};

fn main() -> latent_se::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LOG_LEVEL", "info")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let codec_epochs = args.first().map_or(15, |a| a.parse().expect("codec epochs"));
    let se_epochs = args.get(1).map_or(20, |a| a.parse().expect("SE epochs"));
    let out = args.get(2).cloned().unwrap_or_else(|| "se_pipeline.ckpt".into());

    let corpus = Corpus::new(CorpusConfig::default())?;
    let (codec, _) = pretrain_codec(CodecConfig::default(), &PretrainConfig { epochs: codec_epochs, ..Default::default() }, &corpus)?;

    let se = SEModel::new(SEConfig { n_blocks: 2, emb: 64, ..Default::default() }, codec.config().latent_dim)?;
    let cfg = TrainConfig {
        lr: 1e-3,
        epochs: se_epochs,
        weights: LossWeights { alpha: 1.0, beta: 2.5, gamma: 0.5 },
        ..Default::default()
    };
    let outcome = train_se(&codec, se, &corpus, &cfg)?;
    for r in &outcome.history {
        println!("epoch {:>3}  val l_emb {:.4}  l_time {:.4}  l_freq {:.4}", r.epoch, r.val.l_emb, r.val.l_time, r.val.l_freq);
    }

    let val = mixture_pairs(&corpus.validation_set()?);
    let report = evaluate(&codec, &outcome.model, &val, &MelPlan::new(&cfg.mel)?)?;
    println!("validation median SI-SNR improvement {:+.2} dB", report.median_si_snr_improvement);

    Pipeline::new(codec, outcome.model)?.save(&out)?;
    println!("saved {out}");
    Ok(())
}
