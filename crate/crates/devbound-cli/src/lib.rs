//! Command line front end for the devbound library.
//!
//! The binary parses a subcommand, optionally merges an experiment
//! config file with flag overrides, runs the requested computation,
//! and emits a CSV or JSON report. All logic lives here so the
//! integration tests can drive it without spawning processes.

pub mod args;
pub mod config;
pub mod report;
pub mod run;

pub use run::run;
