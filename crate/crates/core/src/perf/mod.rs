//! Multiply-accumulate counting, real-time factor, and the latent vs waveform comparison.

mod macs;
mod rtf;

pub use macs::{count_macs, se_layers, LayerSpec, MacEntry, MacReport, TimeDomainBaseline};
pub use rtf::{compare_efficiency, measure_rtf, EfficiencyReport, EfficiencyRow, RtfResult, EFFICIENCY_HEADER, MIN_RTF_RUNS};
