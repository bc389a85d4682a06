//! Enhances a WAV file with a saved pipeline. Without arguments it writes a
//! synthetic noisy input and uses an untrained pipeline, which only shows the
//! plumbing.
//!
//! cargo run --release --example enhance_wav -- [pipeline.ckpt] [in.wav] [out.wav]

use latent_se::codec::{CodecConfig, CodecModel};
use latent_se::data::{mix_at_snr, synthesize, wav_read, wav_write, SourceKind, UtteranceSpec};
use latent_se::dsp::si_snr;
use latent_se::pipeline::Pipeline;
use latent_se::se::{SEConfig, SEModel};

fn main() -> latent_se::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let pipe = match args.first() {
        Some(p) => Pipeline::load(p)?,
        None => Pipeline::new(CodecModel::new(CodecConfig::default())?, SEModel::new(SEConfig::default(), 64)?)?,
    };
    let input = args.get(1).cloned().unwrap_or_else(|| {
        let clean = synthesize(&UtteranceSpec::new(3, 2.0, 16_000, SourceKind::PseudoSpeech).unwrap()).unwrap();
        let noise = synthesize(&UtteranceSpec::new(4, 2.0, 16_000, SourceKind::Pink).unwrap()).unwrap();
        let p = mix_at_snr(&clean, &noise, 5.0).unwrap();
        wav_write("noisy.wav", &p.noisy, 16_000).unwrap();
        "noisy.wav".into()
    });
    let output = args.get(2).cloned().unwrap_or_else(|| "enhanced.wav".into());

    let wav = wav_read(&input)?;
    let e = pipe.enhance(&wav.samples)?;
    wav_write(&output, &e.wave, wav.sample_rate)?;
    let t = e.times;
    println!("{input} -> {output}: {} samples, latent {:?}", e.wave.len(), e.y_e.shape());
    println!(
        "encode {:.3} s, se {:.3} s, quantize {:.3} s, decode {:.3} s (RTF {:.4})",
        t.encode,
        t.se,
        t.quantize,
        t.decode,
        t.total() * wav.sample_rate as f64 / wav.samples.len() as f64
    );
    println!("SI-SNR of output against input {:.2} dB", si_snr(&wav.samples, &e.wave)?);
    Ok(())
}
