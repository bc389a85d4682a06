pub mod autodiff;
pub mod cli;
pub mod codec;
pub mod config;
pub mod data;
pub mod dsp;
pub mod error;
pub mod io;
pub mod losses;
pub mod perf;
pub mod pipeline;
pub mod se;
pub mod train;

pub use error::{Error, Result};
