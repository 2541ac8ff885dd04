//! Library side of the `faraday-sim` command-line tool: configuration
//! files, the subcommands and the validation suites.

pub mod commands;
pub mod config;
pub mod validate;
