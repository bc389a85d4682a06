//! Transformer enhancement network operating on codec latents.

mod config;
mod model;

pub use config::SEConfig;
pub use model::{positional_encoding, ModulationBlock, SEModel, TransformerBlock};
