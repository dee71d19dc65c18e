pub mod activation;
pub mod bench;
pub mod cka;
pub mod cli;
pub mod clustering;
pub mod correlation;
pub mod error;
pub mod labels;
pub mod nact;
pub mod pipeline;
pub mod probe;
pub mod ranking;
pub mod report;
pub mod synth;

pub use error::{Error, Result};
