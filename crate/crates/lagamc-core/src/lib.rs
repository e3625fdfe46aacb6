//! Core algorithms for generative multi-label text classification.
//!
//! The pipeline implemented here frames multi-label classification as text
//! generation: a sequence-to-sequence generator is fine-tuned to emit the
//! natural-language descriptions of a document's labels, and at inference
//! time each generated sentence is mapped back to the nearest label by
//! cosine similarity of sentence embeddings.
//!
//! Modules follow the pipeline stages:
//!
//! - [`catalog`] — label catalogs, documents, dataset splits, statistics.
//! - [`descgen`] — refinement prompts and the text-generation client used
//!   to turn seed label definitions into dataset-specific descriptions.
//! - [`promptkit`] — prompt/target construction and sentence splitting.
//! - [`loss`] — the hybrid cross-entropy + semantic loss and its learnable
//!   mixing weight.
//! - [`model`] — the bundled reference generator and sentence encoder,
//!   including low-rank adaptation.
//! - [`trainer`] — the supervised generative phase.
//! - [`matcher`] — embedding-based label matching with batched and
//!   sequential similarity paths.
//! - [`evalkit`] — Micro/Macro-F1 and the analysis slices.
//!
//! The crate is `no_std`-compatible (requires `alloc`); all IO, file
//! formats, and the CLI live in the companion `lagamc` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod catalog;
pub mod descgen;
pub mod evalkit;
pub mod loss;
pub mod matcher;
pub mod model;
pub mod promptkit;
pub mod rng;
pub mod synthetic;
pub mod trainer;

pub use catalog::{
    DatasetSplit, DatasetStats, DescriptionSource, Document, Label, LabelCatalog, SplitName,
};
pub use loss::{hybrid_loss, semantic_loss, MixingWeight};
pub use matcher::{LabelEmbeddingMatrix, MatchResult};
pub use model::{
    EncoderHandle, GeneratorHandle, ParamCounts, ReferenceEncoder, ReferenceGenerator,
    SentenceEncoder, TextGenerator, Vocab,
};
pub use trainer::{SemanticMode, TrainConfig, TrainedArtifacts};
