//! Counts MACs of the latent SE model and of a waveform-domain stack of the
//! same width and depth, then times the full pipeline.
//!
//! cargo run --release --example mac_profile

use latent_se::codec::{CodecConfig, CodecModel};
use latent_se::perf::{compare_efficiency, count_macs, se_layers, TimeDomainBaseline};
use latent_se::pipeline::Pipeline;
use latent_se::se::{SEConfig, SEModel};

fn main() -> latent_se::Result<()> {
    let se_cfg = SEConfig::default();
    let pipe = Pipeline::new(CodecModel::new(CodecConfig::default())?, SEModel::new(se_cfg.clone(), 64)?)?;

    let report = count_macs(&se_layers(&se_cfg, 64, pipe.codec.hop()), 160_000, 16_000)?;
    println!("latent SE on {} s of audio:", report.input_duration);
    for e in &report.entries {
        println!("  {:<20} {:<18} {:>14}", e.layer, e.kind, e.macs);
    }
    println!("  {:<39} {:>14}  ({:.3} GMACs)\n", "total", report.total, report.gmacs());

    let baseline = TimeDomainBaseline::matched(&se_cfg);
    let cmp = compare_efficiency(&pipe, &baseline, &[1.0, 2.0, 5.0, 10.0], Some(5))?;
    print!("{}", cmp.table());
    Ok(())
}
