//! Library side of the `pawfuse` command: configuration, run manifests and
//! the subcommand implementations.

pub mod commands;
pub mod config;
pub mod manifest;
