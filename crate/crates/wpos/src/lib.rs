//! Experiment harness for zone-level UWB positioning: dataset generation,
//! feature-size selection, training and evaluation of the three classifiers,
//! and CSV reporting.

pub mod config;
pub mod dataset;
pub mod experiment;
pub mod pipeline;
pub mod select;

pub use config::ExperimentConfig;
