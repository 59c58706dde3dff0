//! Batch driver for the membrane phase-field model: configuration,
//! subcommands, checkpoints and tabular output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use checkpoint::Checkpoint;
pub use config::{Initial, RunConfig};
pub use error::CliError;
