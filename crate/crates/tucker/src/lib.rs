//! File formats, reports and the command-line front end for `tucker-core`.
//!
//! - [`io`]: tensor JSON/TKR1 and factor JSON files.
//! - [`config`]: [`RunConfig`](config::RunConfig), layered from defaults,
//!   a JSON file and flags.
//! - [`report`]: trace lines, run summaries and verification reports.
//! - [`cli`]: the `generate`, `decompose` and `verify` subcommands.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod report;

pub use error::{CliError, Result};
