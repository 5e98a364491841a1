//! Library half of the `symtrain` binary: configuration parsing, run
//! manifests, and the command implementations. The binary in `main.rs` is a
//! thin clap wrapper so everything here stays testable in-process.

pub mod commands;
pub mod config;
pub mod exit;
pub mod io_util;
pub mod manifest;

pub use config::RunConfig;
