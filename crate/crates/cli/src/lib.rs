//! Experiment registry, configuration and output for the `fri-lab` binary.

pub mod config;
pub mod output;
pub mod registry;
