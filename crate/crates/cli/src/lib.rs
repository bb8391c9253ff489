//! Command-line front end for `kgcrawl-core`.

pub mod args;
pub mod commands;
pub mod config;
