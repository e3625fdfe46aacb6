//! Label Matcher: map each generated description sentence to the nearest
//! predefined label by cosine similarity, with an optional hallucination
//! threshold.
//!
//! Two similarity paths are provided. [`rank_sequential`] is the
//! loop-based reference: one sentence×label pair at a time, a single
//! accumulation chain. [`rank_batch`] is the matrix pass: each label row
//! is streamed across a block of sentences at once, giving the CPU
//! independent accumulator lanes to vectorize and reusing the row while it
//! is cache-hot. Every pair's products are accumulated in f64 over
//! ascending dimension order in both paths, so the two produce
//! bit-identical similarities and never diverge on label choices.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::catalog::{Document, LabelCatalog};
use crate::model::{normalize, EncoderHandle, TextGenerator};
use crate::promptkit::{build_prompt, split_generated, PromptError, PromptTemplate};

/// Queries processed per pass over the label matrix in the batched path.
/// Sized so a block of queries plus one label row stay cache-resident.
const QUERY_BLOCK: usize = 8;

/// Row-major matrix of unit-norm label description embeddings, bound to
/// the catalog version it was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEmbeddingMatrix {
    dim: usize,
    n_labels: usize,
    rows: Vec<f32>,
    catalog_hash: u64,
}

impl LabelEmbeddingMatrix {
    /// Build from pre-normalized rows. Each row must be unit-norm within
    /// 1e-6 and row order must be catalog order.
    pub fn from_rows(dim: usize, rows: Vec<f32>, catalog_hash: u64) -> Result<Self, MatchError> {
        if dim == 0 || rows.is_empty() || !rows.len().is_multiple_of(dim) {
            return Err(MatchError::BadShape {
                len: rows.len(),
                dim,
            });
        }
        let n_labels = rows.len() / dim;
        for (i, row) in rows.chunks_exact(dim).enumerate() {
            let norm: f64 = libm::sqrt(row.iter().map(|&x| (x as f64) * (x as f64)).sum());
            if (norm - 1.0).abs() > 1e-6 {
                return Err(MatchError::RowNotUnitNorm { row: i, norm });
            }
        }
        Ok(LabelEmbeddingMatrix {
            dim,
            n_labels,
            rows,
            catalog_hash,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn catalog_hash(&self) -> u64 {
        self.catalog_hash
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }
}

/// Embed every refined description of the catalog, in catalog order.
pub fn embed_catalog(
    enc: &dyn EncoderHandle,
    catalog: &LabelCatalog,
) -> Result<LabelEmbeddingMatrix, MatchError> {
    if catalog.is_empty() {
        return Err(MatchError::EmptyCatalog);
    }
    let dim = enc.dim();
    let mut rows = Vec::with_capacity(catalog.len() * dim);
    for entry in catalog.entries() {
        if entry.refined_text.trim().is_empty() {
            return Err(MatchError::MissingDescription {
                label: entry.name.clone(),
            });
        }
        rows.extend(unit_f32(&enc.embed_text(&entry.refined_text)));
    }
    LabelEmbeddingMatrix::from_rows(dim, rows, catalog.fingerprint())
}

/// Cast an f64 unit vector to f32, re-normalizing so the row-level
/// unit-norm invariant survives the precision change.
fn unit_f32(v: &[f64]) -> Vec<f32> {
    let mut v64 = v.to_vec();
    normalize(&mut v64);
    v64.iter().map(|&x| x as f32).collect()
}

/// Shared per-pair dot product. Four independent accumulators break the
/// add dependency chain; both similarity paths call this exact kernel so
/// they produce identical floats.
#[inline]
pub fn dot_f32(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        acc += *x as f64 * *y as f64;
    }
    acc as f32
}

/// Best label per query (index and similarity), or `None` when a threshold
/// is set and no similarity reaches it. The similarity of the best label
/// is always reported, assigned or not. Ties break toward the lowest
/// label index.
pub type Ranking = Vec<(Option<usize>, f32)>;

/// Loop-based reference: one similarity at a time.
pub fn rank_sequential(
    queries: &[f32],
    dim: usize,
    labels: &LabelEmbeddingMatrix,
    threshold: Option<f32>,
) -> Ranking {
    assert_eq!(dim, labels.dim(), "query/label dimension mismatch");
    assert_eq!(queries.len() % dim.max(1), 0, "ragged query matrix");
    let mut out = Vec::with_capacity(queries.len() / dim.max(1));
    for q in queries.chunks_exact(dim) {
        let mut best_idx = 0usize;
        let mut best_sim = f32::NEG_INFINITY;
        for l in 0..labels.n_labels() {
            let sim = dot_f32(q, labels.row(l));
            if sim > best_sim {
                best_sim = sim;
                best_idx = l;
            }
        }
        out.push(apply_threshold(best_idx, best_sim, threshold));
    }
    out
}

/// Matrix pass: score a whole block of queries against each label row in
/// one sweep. The block is repacked dimension-major so the inner loop
/// advances `QUERY_BLOCK` independent accumulators in lockstep. Each
/// accumulator still sums its pair's products in ascending dimension
/// order, exactly like [`rank_sequential`], so per-pair results are
/// bit-identical between the two paths.
pub fn rank_batch(
    queries: &[f32],
    dim: usize,
    labels: &LabelEmbeddingMatrix,
    threshold: Option<f32>,
) -> Ranking {
    assert_eq!(dim, labels.dim(), "query/label dimension mismatch");
    assert_eq!(queries.len() % dim.max(1), 0, "ragged query matrix");
    let n_queries = queries.len() / dim.max(1);
    let mut out = Vec::with_capacity(n_queries);
    let mut packed = alloc::vec![0.0f64; QUERY_BLOCK * dim];
    for block in queries.chunks(QUERY_BLOCK * dim) {
        let block_len = block.len() / dim;
        // dimension-major layout: packed[d * QUERY_BLOCK + q] = query_q[d]
        for (q, row) in block.chunks_exact(dim).enumerate() {
            for (d, &v) in row.iter().enumerate() {
                packed[d * QUERY_BLOCK + q] = v as f64;
            }
        }
        // unused lanes contribute zeros and are discarded below
        for q in block_len..QUERY_BLOCK {
            for d in 0..dim {
                packed[d * QUERY_BLOCK + q] = 0.0;
            }
        }
        let mut best: [(usize, f32); QUERY_BLOCK] = [(0, f32::NEG_INFINITY); QUERY_BLOCK];
        for l in 0..labels.n_labels() {
            let row = labels.row(l);
            let mut acc = [0.0f64; QUERY_BLOCK];
            for (d, &lv) in row.iter().enumerate() {
                let lane = &packed[d * QUERY_BLOCK..(d + 1) * QUERY_BLOCK];
                let lv = lv as f64;
                for q in 0..QUERY_BLOCK {
                    acc[q] += lane[q] * lv;
                }
            }
            for (q, &sum) in acc.iter().enumerate().take(block_len) {
                let sim = sum as f32;
                if sim > best[q].1 {
                    best[q] = (l, sim);
                }
            }
        }
        for &(idx, sim) in best.iter().take(block_len) {
            out.push(apply_threshold(idx, sim, threshold));
        }
    }
    out
}

fn apply_threshold(idx: usize, sim: f32, threshold: Option<f32>) -> (Option<usize>, f32) {
    match threshold {
        Some(t) if sim < t => (None, sim),
        _ => (Some(idx), sim),
    }
}

/// One matched sentence: the text, the assigned label (if any), and the
/// best similarity observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceMatch {
    pub text: String,
    pub label_index: Option<usize>,
    pub label: Option<String>,
    pub similarity: f32,
}

/// Per-document match outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub document_id: String,
    pub sentences: Vec<SentenceMatch>,
    /// Deduplicated assigned labels in first-occurrence order.
    pub predicted_labels: Vec<String>,
}

fn embed_sentences(enc: &dyn EncoderHandle, sentences: &[String]) -> Vec<f32> {
    let dim = enc.dim();
    let mut queries = Vec::with_capacity(sentences.len() * dim);
    for s in sentences {
        queries.extend(unit_f32(&enc.embed_text(s)));
    }
    queries
}

fn assemble(
    catalog_names: impl Fn(usize) -> String,
    sentences: &[String],
    ranking: Ranking,
) -> Vec<SentenceMatch> {
    sentences
        .iter()
        .zip(ranking)
        .map(|(text, (idx, sim))| SentenceMatch {
            text: text.clone(),
            label_index: idx,
            label: idx.map(&catalog_names),
            similarity: sim,
        })
        .collect()
}

/// Match sentences via the batched path.
pub fn match_batch(
    sentences: &[String],
    enc: &dyn EncoderHandle,
    labels: &LabelEmbeddingMatrix,
    catalog: &LabelCatalog,
    threshold: Option<f32>,
) -> Result<Vec<SentenceMatch>, MatchError> {
    check_binding(labels, catalog)?;
    let queries = embed_sentences(enc, sentences);
    let ranking = rank_batch(&queries, enc.dim(), labels, threshold);
    Ok(assemble(
        |i| catalog.entry(i).name.clone(),
        sentences,
        ranking,
    ))
}

/// Match sentences via the sequential reference path.
pub fn match_sequential(
    sentences: &[String],
    enc: &dyn EncoderHandle,
    labels: &LabelEmbeddingMatrix,
    catalog: &LabelCatalog,
    threshold: Option<f32>,
) -> Result<Vec<SentenceMatch>, MatchError> {
    check_binding(labels, catalog)?;
    let queries = embed_sentences(enc, sentences);
    let ranking = rank_sequential(&queries, enc.dim(), labels, threshold);
    Ok(assemble(
        |i| catalog.entry(i).name.clone(),
        sentences,
        ranking,
    ))
}

fn check_binding(labels: &LabelEmbeddingMatrix, catalog: &LabelCatalog) -> Result<(), MatchError> {
    if labels.catalog_hash() != catalog.fingerprint() {
        return Err(MatchError::CatalogFingerprintMismatch {
            matrix: labels.catalog_hash(),
            catalog: catalog.fingerprint(),
        });
    }
    Ok(())
}

/// Full per-document inference: prompt → generate → split → match →
/// deduplicate. An empty generation yields an empty prediction set.
#[allow(clippy::too_many_arguments)]
pub fn predict(
    doc: &Document,
    gen: &dyn TextGenerator,
    enc: &dyn EncoderHandle,
    catalog: &LabelCatalog,
    labels: &LabelEmbeddingMatrix,
    template: &PromptTemplate,
    threshold: Option<f32>,
    max_output_tokens: usize,
) -> Result<MatchResult, MatchError> {
    let prompt = build_prompt(template, doc).map_err(|source| MatchError::Prompt {
        document_id: doc.id.clone(),
        source,
    })?;
    let generated = gen.generate(&gen.tokenize(&prompt), max_output_tokens);
    let sentences = split_generated(&generated);
    let matches = match_batch(&sentences, enc, labels, catalog, threshold)?;
    let mut predicted = Vec::new();
    for m in &matches {
        if let Some(name) = &m.label {
            if !predicted.contains(name) {
                predicted.push(name.clone());
            }
        }
    }
    Ok(MatchResult {
        document_id: doc.id.clone(),
        sentences: matches,
        predicted_labels: predicted,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum MatchError {
    EmptyCatalog,
    MissingDescription {
        label: String,
    },
    BadShape {
        len: usize,
        dim: usize,
    },
    RowNotUnitNorm {
        row: usize,
        norm: f64,
    },
    CatalogFingerprintMismatch {
        matrix: u64,
        catalog: u64,
    },
    Prompt {
        document_id: String,
        source: PromptError,
    },
}

impl fmt::Display for MatchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatchError::EmptyCatalog => write!(f, "cannot embed an empty catalog"),
            MatchError::MissingDescription { label } => {
                write!(f, "label {label:?} has no refined description to embed")
            }
            MatchError::BadShape { len, dim } => {
                write!(f, "embedding matrix of {len} values is not a multiple of dim {dim}")
            }
            MatchError::RowNotUnitNorm { row, norm } => {
                write!(f, "label row {row} has norm {norm}, expected 1")
            }
            MatchError::CatalogFingerprintMismatch { matrix, catalog } => write!(
                f,
                "embedding matrix was built from a different catalog (matrix {matrix:#x}, catalog {catalog:#x})"
            ),
            MatchError::Prompt { document_id, source } => {
                write!(f, "failed to build prompt for document {document_id:?}: {source}")
            }
        }
    }
}

impl core::error::Error for MatchError {}
