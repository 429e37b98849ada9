//! Command-line front end: configuration parsing with file-plus-flag
//! layering, named seed substreams, CSV emission, and the five experiment
//! subcommands.

pub mod commands;
pub mod config;
pub mod output;
pub mod seeds;
