use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::macs::{count_macs, se_layers, TimeDomainBaseline};
use crate::dsp::median;
use crate::error::{Error, Result};
use crate::pipeline::{Pipeline, StageTimes};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RtfResult {
    pub audio_seconds: f64,
    /// Median end-to-end wall time.
    pub wall_seconds: f64,
    pub wall_mean: f64,
    pub wall_min: f64,
    pub wall_max: f64,
    pub rtf: f64,
    pub rtf_mean: f64,
    /// Per-stage times of the run closest to the median.
    pub stages: StageTimes,
    pub runs: Vec<f64>,
    pub threads: usize,
}

impl RtfResult {
    /// Relative gap between the stage sum and the end-to-end time.
    pub fn stage_gap(&self) -> f64 {
        (self.stages.total() - self.wall_seconds).abs() / self.wall_seconds
    }
}

pub const MIN_RTF_RUNS: usize = 5;

/// Times `runs` enhancements of `wave`. Single-threaded unless `threads` > 1.
pub fn measure_rtf(pipeline: &Pipeline, wave: &[f64], runs: usize, threads: usize) -> Result<RtfResult> {
    if runs < MIN_RTF_RUNS {
        return Err(Error::arg("measure_rtf", format!("need at least {MIN_RTF_RUNS} runs, got {runs}")));
    }
    if wave.is_empty() {
        return Err(Error::arg("measure_rtf", "empty input"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::arg("measure_rtf", e.to_string()))?;
    let timed: Vec<(f64, StageTimes)> = pool.install(|| {
        (0..runs)
            .map(|_| {
                let t0 = Instant::now();
                let e = pipeline.enhance(wave)?;
                Ok((t0.elapsed().as_secs_f64(), e.times))
            })
            .collect::<Result<_>>()
    })?;
    let walls: Vec<f64> = timed.iter().map(|t| t.0).collect();
    let wall = median(&walls);
    let audio = wave.len() as f64 / pipeline.codec.config().sample_rate as f64;
    let mean = walls.iter().sum::<f64>() / runs as f64;
    let closest = timed.iter().min_by(|a, b| (a.0 - wall).abs().total_cmp(&(b.0 - wall).abs())).map(|t| t.1).unwrap_or_default();
    Ok(RtfResult {
        audio_seconds: audio,
        wall_seconds: wall,
        wall_mean: mean,
        wall_min: walls.iter().copied().fold(f64::INFINITY, f64::min),
        wall_max: walls.iter().copied().fold(0.0, f64::max),
        rtf: wall / audio,
        rtf_mean: mean / audio,
        stages: closest,
        runs: walls,
        threads: threads.max(1),
    })
}

pub const EFFICIENCY_HEADER: &str = "duration_s,model,macs_total,rtf_median,rtf_mean";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub duration_s: f64,
    pub model: String,
    pub macs_total: u64,
    pub rtf_median: Option<f64>,
    pub rtf_mean: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub rows: Vec<EfficiencyRow>,
}

impl EfficiencyReport {
    /// Baseline over latent MACs at `duration_s`.
    pub fn ratio(&self, duration_s: f64) -> Option<f64> {
        let get = |m: &str| self.rows.iter().find(|r| r.duration_s == duration_s && r.model == m).map(|r| r.macs_total);
        Some(get("time_domain")? as f64 / get("latent")? as f64)
    }

    pub fn csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        let mut s = format!("{EFFICIENCY_HEADER}\n");
        for r in &self.rows {
            s += &format!("{},{},{},{},{}\n", r.duration_s, r.model, r.macs_total, opt(r.rtf_median), opt(r.rtf_mean));
        }
        s
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:>10} {:>12} {:>14} {:>10} {:>8}\n", "seconds", "model", "GMACs", "RTF", "ratio");
        for r in &self.rows {
            let rtf = r.rtf_median.map_or("-".to_string(), |v| format!("{v:.4}"));
            let ratio = if r.model == "time_domain" { self.ratio(r.duration_s).map_or("-".into(), |v| format!("{v:.1}x")) } else { String::new() };
            s += &format!("{:>10} {:>12} {:>14.3} {:>10} {:>8}\n", r.duration_s, r.model, r.macs_total as f64 / 1e9, rtf, ratio);
        }
        s
    }
}

/// MACs of the latent model and the waveform baseline per duration; RTF of the
/// latent pipeline when `rtf_runs` is set. The baseline is only counted.
pub fn compare_efficiency(
    pipeline: &Pipeline,
    baseline: &TimeDomainBaseline,
    durations: &[f64],
    rtf_runs: Option<usize>,
) -> Result<EfficiencyReport> {
    baseline.validate()?;
    let sr = pipeline.codec.config().sample_rate;
    let latent = se_layers(pipeline.se.config(), pipeline.se.latent_dim(), pipeline.codec.hop());
    let mut rows = Vec::new();
    for &d in durations {
        if !(d > 0.0) {
            return Err(Error::arg("compare_efficiency", format!("duration {d} must be positive")));
        }
        let len = (d * sr as f64).round() as usize;
        let rtf = match rtf_runs {
            Some(runs) => Some(measure_rtf(pipeline, &vec![0.0; len], runs, 1)?),
            None => None,
        };
        rows.push(EfficiencyRow {
            duration_s: d,
            model: "latent".into(),
            macs_total: count_macs(&latent, len, sr)?.total,
            rtf_median: rtf.as_ref().map(|r| r.rtf),
            rtf_mean: rtf.as_ref().map(|r| r.rtf_mean),
        });
        rows.push(EfficiencyRow {
            duration_s: d,
            model: "time_domain".into(),
            macs_total: count_macs(&baseline.layers(), len, sr)?.total,
            rtf_median: None,
            rtf_mean: None,
        });
    }
    Ok(EfficiencyReport { rows })
}
