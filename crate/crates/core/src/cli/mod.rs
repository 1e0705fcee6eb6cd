//! Command implementations behind the `uroevent` binary. Each command
//! reads artifacts from a working directory, writes its own outputs there
//! and records a run manifest under `manifests/`.

pub mod commands;
pub mod config;
pub mod manifest;

pub use commands::{evaluate, featurize, ingest, pfi, predict, synth, train, Workspace};
pub use config::RunConfig;
pub use manifest::{Run, RunManifest};
