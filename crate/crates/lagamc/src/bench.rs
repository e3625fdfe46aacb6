//! Matcher micro-benchmark: batched matrix path vs sequential reference
//! on synthetic unit-norm embeddings.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use lagamc_core::matcher::{rank_batch, rank_sequential, LabelEmbeddingMatrix};
use lagamc_core::rng::Rng;

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub sentences: usize,
    pub labels: usize,
    pub dim: usize,
    pub repeats: usize,
    pub batched_seconds: f64,
    pub sequential_seconds: f64,
    pub speedup: f64,
    /// Sanity check: both paths agreed on every label choice.
    pub outputs_identical: bool,
}

pub fn random_unit_rows(n: usize, dim: usize, rng: &mut Rng) -> Vec<f32> {
    let mut rows = Vec::with_capacity(n * dim);
    for _ in 0..n {
        let v: Vec<f64> = (0..dim).map(|_| rng.next_gaussian()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        rows.extend(v.iter().map(|&x| (x / norm) as f32));
    }
    rows
}

/// Time both similarity paths on a `sentences × labels × dim` instance.
/// The reported number is the fastest of `repeats` runs per path.
pub fn run_bench(
    sentences: usize,
    labels: usize,
    dim: usize,
    repeats: usize,
    seed: u64,
) -> AppResult<BenchReport> {
    if sentences == 0 || labels == 0 || dim == 0 {
        return Err(AppError::validation("bench sizes must all be positive"));
    }
    let repeats = repeats.max(1);
    let mut rng = Rng::new(seed);
    let label_rows = random_unit_rows(labels, dim, &mut rng);
    let matrix = LabelEmbeddingMatrix::from_rows(dim, label_rows, 0)
        .map_err(|e| AppError::stage("bench-matcher", e))?;
    let queries = random_unit_rows(sentences, dim, &mut rng);

    let mut batched_seconds = f64::INFINITY;
    let mut sequential_seconds = f64::INFINITY;
    let mut outputs_identical = true;
    for _ in 0..repeats {
        let t = Instant::now();
        let b = rank_batch(&queries, dim, &matrix, None);
        batched_seconds = batched_seconds.min(t.elapsed().as_secs_f64());

        let t = Instant::now();
        let s = rank_sequential(&queries, dim, &matrix, None);
        sequential_seconds = sequential_seconds.min(t.elapsed().as_secs_f64());

        outputs_identical &= b == s;
    }
    Ok(BenchReport {
        sentences,
        labels,
        dim,
        repeats,
        batched_seconds,
        sequential_seconds,
        speedup: sequential_seconds / batched_seconds,
        outputs_identical,
    })
}
