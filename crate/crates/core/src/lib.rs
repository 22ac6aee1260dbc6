//! Fusion, evaluation and weight search for multi-modal few-shot n-gram
//! spotting on handwritten text lines, plus synthetic data generation.

pub mod cli;
pub mod error;
pub mod fusion;
pub mod io;
pub mod metrics;
pub mod model;
pub mod search;
pub mod synth;

pub use error::{Error, Result};
