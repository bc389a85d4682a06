//! Mixes synthetic speech with noise at a few SNRs and reports measured SNR,
//! SI-SNR and log-mel distance to the clean signal.
//!
//! cargo run --release --example dsp_tour

use latent_se::data::{mix_at_snr, synthesize, SourceKind, UtteranceSpec};
use latent_se::dsp::{si_snr, snr_db, MelConfig, MelPlan};
use latent_se::losses::freq_loss;

fn main() -> latent_se::Result<()> {
    let clean = synthesize(&UtteranceSpec::new(1, 1.0, 16_000, SourceKind::PseudoSpeech)?)?;
    let noise = synthesize(&UtteranceSpec::new(2, 1.0, 16_000, SourceKind::Pink)?)?;
    let plan = MelPlan::new(&MelConfig::default())?;
    let mel = plan.compute(&clean)?;
    println!("clean: {} samples, mel {:?}", clean.len(), mel.shape());
    println!("{:>8} {:>10} {:>10} {:>10}", "target", "measured", "SI-SNR", "mel dist");
    for target in [-5.0, 0.0, 5.0, 10.0, 20.0] {
        let p = mix_at_snr(&clean, &noise, target)?;
        let residual: Vec<f64> = p.noisy.iter().zip(&p.clean).map(|(n, c)| n - c).collect();
        println!(
            "{:>8.1} {:>10.4} {:>10.3} {:>10.4}",
            target,
            snr_db(&p.clean, &residual),
            si_snr(&p.clean, &p.noisy)?,
            freq_loss(&p.clean, &p.noisy, &plan)?
        );
    }
    Ok(())
}
