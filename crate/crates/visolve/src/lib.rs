//! File formats, experiment runner and command-line tooling for `visolve-core`.
//!
//! * [`ingest`]: LIBSVM and PGM readers and the dataset downloader.
//! * [`config`]: the TOML experiment description.
//! * [`experiment`]: problem construction, reference solutions, cell runs, manifests.
//! * [`check`]: bound verification of a finished run.
//! * [`plotdata`]: long-format and seed-aggregated CSV for plotting.

pub mod check;
pub mod config;
pub mod error;
pub mod experiment;
pub mod ingest;
pub mod plotdata;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
