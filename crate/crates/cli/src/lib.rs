//! Command-line pipeline around `xirpgan-core`: M4-style ingestion, run
//! configuration, per-dataset stages, reports and plots.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod ingest;
pub mod pipeline;
pub mod plots;
pub mod smoke;
