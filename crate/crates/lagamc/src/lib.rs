//! IO, file formats, HTTP client, pipeline orchestration, and the CLI for
//! the generative multi-label classification toolkit.
//!
//! All algorithms live in `lagamc-core`; this crate turns them into a
//! runnable tool: JSONL dataset ingestion, catalog/template files,
//! training artifact persistence, the resumable `run` pipeline with its
//! manifest, and the `lagamc` binary.

pub mod artifacts;
pub mod bench;
pub mod cli;
pub mod client;
pub mod error;
pub mod io;
pub mod pipeline;

pub use error::AppError;
