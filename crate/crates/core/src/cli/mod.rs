//! Command-line front end: configuration parsing, subcommand dispatch and CSV
//! emission.

pub mod config;
pub mod output;
pub mod run;
