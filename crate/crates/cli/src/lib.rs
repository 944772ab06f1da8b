//! Batch front end: manifests, file formats and the simulate / train /
//! evaluate / report pipeline behind the `radar-fidelity` binary.

pub mod commands;
pub mod error;
pub mod files;
pub mod manifest;
pub mod svg;

pub use commands::{Layout, Smoothing, METRICS};
pub use error::{CliError, EXIT_INVALID, EXIT_RUNTIME};
pub use manifest::{RunManifest, SEED_ENV};
