//! Optimizer, SE training with a frozen codec, and the loss ablation.

mod ablation;
mod adam;
mod manifest;
mod se_train;

pub use ablation::{run_ablation, AblationResult, AblationRow, ABLATION_HEADER};
pub use adam::{Adam, AdamConfig};
pub use manifest::RunManifest;
pub use se_train::{
    evaluate, mixture_pairs, train_se, Ablation, EpochRecord, EvalReport, TrainConfig, TrainOutcome, UtteranceEval,
};

#[cfg(test)]
mod tests;
