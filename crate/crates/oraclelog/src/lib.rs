//! File formats, package search and the command-line driver for
//! [`oraclelog_core`].

pub mod cli;
pub mod manifest;
pub mod search;

pub use cli::{list_builtins, parse_args, run, CliConfig, Mode, Outcome};
pub use manifest::{parse_manifest, Manifest, ManifestError};
pub use search::SearchPath;
