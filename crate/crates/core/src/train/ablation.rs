use std::path::Path;

use serde::{Deserialize, Serialize};

use super::se_train::{evaluate, mixture_pairs, train_se, Ablation, TrainConfig, TrainOutcome};
use crate::codec::CodecModel;
use crate::data::Corpus;
use crate::dsp::MelPlan;
use crate::error::Result;
use crate::se::{SEConfig, SEModel};

pub const ABLATION_HEADER: &str = "arm,val_l_emb,si_snr_improvement,mel_distance";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub arm: Ablation,
    pub initial_val_l_emb: f64,
    pub val_l_emb: f64,
    /// Median over the validation set, in dB.
    pub si_snr_improvement: f64,
    pub mel_distance: f64,
}

#[derive(Clone, Debug)]
pub struct AblationResult {
    pub rows: Vec<AblationRow>,
    pub outcomes: Vec<TrainOutcome>,
}

impl AblationResult {
    pub fn row(&self, arm: Ablation) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.arm == arm)
    }

    pub fn outcome(&self, arm: Ablation) -> Option<&TrainOutcome> {
        self.rows.iter().position(|r| r.arm == arm).map(|i| &self.outcomes[i])
    }

    pub fn csv(&self) -> String {
        let mut s = format!("{ABLATION_HEADER}\n");
        for r in &self.rows {
            s += &format!("{},{:e},{:e},{:e}\n", r.arm.name(), r.val_l_emb, r.si_snr_improvement, r.mel_distance);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io::write_bytes_atomic(path, self.csv().as_bytes())
    }
}

/// Trains one SE model per arm from the same initial weights and data and
/// scores each on the validation split.
pub fn run_ablation(codec: &CodecModel, se_cfg: &SEConfig, corpus: &Corpus, cfg: &TrainConfig) -> Result<AblationResult> {
    let init = SEModel::new(se_cfg.clone(), codec.config().latent_dim)?;
    let val = mixture_pairs(&corpus.validation_set()?);
    let plan = MelPlan::new(&cfg.mel)?;
    let mut rows = Vec::new();
    let mut outcomes = Vec::new();
    for arm in Ablation::ARMS {
        let arm_cfg = TrainConfig {
            ablation: arm,
            checkpoint_dir: cfg.checkpoint_dir.as_ref().map(|d| d.join(arm.name())),
            ..cfg.clone()
        };
        let out = train_se(codec, init.clone(), corpus, &arm_cfg)?;
        let report = evaluate(codec, &out.model, &val, &plan)?;
        rows.push(AblationRow {
            arm,
            initial_val_l_emb: out.history[0].val.l_emb,
            val_l_emb: report.mean_latent_l1,
            si_snr_improvement: report.median_si_snr_improvement,
            mel_distance: report.mean_mel_distance,
        });
        outcomes.push(out);
    }
    Ok(AblationResult { rows, outcomes })
}
