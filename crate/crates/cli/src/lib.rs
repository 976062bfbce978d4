//! Command-line front end for `strata-bounds-core`: data ingestion,
//! embedded datasets, parallel posterior evaluation and report output.

pub mod cli;
pub mod commands;
pub mod datasets;
pub mod error;
pub mod ingest;
pub mod parallel;
pub mod report;

pub use error::{CliError, Result};
