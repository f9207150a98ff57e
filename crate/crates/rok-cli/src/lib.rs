//! Configuration, problem registry, reference files, sweeps and subcommands
//! for the `rok` binary.

pub mod commands;
pub mod config;
pub mod reference;
pub mod registry;
pub mod sweep;

pub use commands::{cmd_defaults, cmd_reference, cmd_run, cmd_stability, cmd_sweep, CliError};
pub use config::RunConfig;
pub use registry::Registry;
