//! Library side of the `dmtlab` command-line tool: configuration merging,
//! codebook files and the subcommand implementations.

pub mod cli;
pub mod codebook_io;
pub mod commands;
pub mod config;
pub mod error;
