//! File formats, experiment harness and analysis traces for `nobn-core`.
//!
//! The `nobn` binary wraps these modules in a command-line tool.

pub mod analysis;
pub mod bench;
pub mod io;

pub use nobn_core as core;
