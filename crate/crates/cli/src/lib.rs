//! Configuration, pipeline orchestration and file outputs for `sbdimer`.

pub mod cache;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod sweep;

pub use cache::{cache_key, Session};
pub use config::{load_config, parse_config, RunConfig, SweepAxis, SweepSpec};
pub use error::{CliError, Result, Stage};
pub use pipeline::{run_pipeline, run_tasks, Manifest, Task};
pub use sweep::{sweep, SweepReport};
