//! File formats, the experiment runner and the command line for smooth
//! min-max monotonic networks. The numerical core lives in `smm_core`.
//!
//! * [`config`]: the TOML run configuration and its hash.
//! * [`io`]: atomic writes, dataset CSV with a mask sidecar, trace CSV.
//! * [`model_file`]: versioned JSON model files with bit-exact parameters.
//! * [`experiment`]: seeded multi-trial suites, resumable trial storage and
//!   reports with quartiles and paired Wilcoxon tests.
//! * [`cli`]: the `smm` command.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod io;
pub mod model_file;

mod error;

pub use crate::config::RunConfig;
pub use crate::error::{Error, Result};
pub use crate::experiment::{run_suite, ExperimentReport, Method, RunOptions, Suite, TrialResult};
pub use crate::model_file::ModelFile;

/// Version recorded in every artifact.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
