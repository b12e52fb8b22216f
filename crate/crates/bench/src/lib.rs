//! Benchmark runner: loads CSV datasets, evaluates models under a retraining
//! schedule and writes per-series and aggregate results.

pub mod config;
pub mod dataset;
pub mod plot;
pub mod run;
pub mod synth;

pub use config::{Resolved, RunConfig, Task};
pub use dataset::{load_dataset, DatasetManifest, LoadError, LoadedSeries};
