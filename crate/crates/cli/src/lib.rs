//! Pipeline behind the `dualnet` command: dataset generation, pretraining,
//! cascaded training, evaluation, reporting and visualization, with
//! provenance checks between steps.

pub mod config;
pub mod error;
pub mod pipeline;

pub use config::{FileConfig, Overrides, Profile, Settings};
pub use error::{exit, CliError, CliResult};
