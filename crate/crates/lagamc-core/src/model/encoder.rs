//! Bundled reference sentence encoder: mean of token embeddings,
//! L2-normalized.
//!
//! Besides plain text embedding it supports a "soft" path that embeds the
//! expected token under per-position output distributions, which is what
//! lets the semantic loss differentiate through the generator's softmax.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::param::Param;
use super::vocab::{Vocab, PAD};
use super::{normalize, EncoderHandle, ParamCounts, SentenceEncoder};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEncoder {
    vocab: Arc<Vocab>,
    dim: usize,
    emb: Param,
    trainable: bool,
}

impl ReferenceEncoder {
    pub fn new(vocab: Arc<Vocab>, dim: usize, seed: u64) -> Self {
        let mut rng = Rng::derive(seed, 0x454e43);
        let emb = Param::randn(vocab.len() * dim, 1.0 / libm::sqrt(dim as f64), &mut rng);
        ReferenceEncoder {
            vocab,
            dim,
            emb,
            trainable: true,
        }
    }

    /// Encoder whose token embeddings are orthonormal basis vectors
    /// (dimension = vocabulary size). Texts over disjoint token sets embed
    /// to exactly orthogonal vectors, which makes similarity values in
    /// tests fully predictable.
    pub fn orthogonal(vocab: Arc<Vocab>) -> Self {
        let v = vocab.len();
        let mut emb = Param::zeros(v * v);
        for i in 0..v {
            emb.data[i * v + i] = 1.0;
        }
        ReferenceEncoder {
            vocab,
            dim: v,
            emb,
            trainable: true,
        }
    }

    pub fn vocab(&self) -> &Arc<Vocab> {
        &self.vocab
    }

    pub fn set_trainable(&mut self, trainable: bool) {
        self.trainable = trainable;
        self.emb.trainable = trainable;
    }

    fn row(&self, id: u32) -> &[f64] {
        &self.emb.data[id as usize * self.dim..(id as usize + 1) * self.dim]
    }

    /// Un-normalized mean embedding of a token sequence. Empty input falls
    /// back to the padding row, the designated empty-text sentinel.
    fn pooled(&self, ids: &[u32]) -> Vec<f64> {
        if ids.is_empty() {
            return self.row(PAD).to_vec();
        }
        let mut mean = vec![0.0; self.dim];
        for &id in ids {
            for (m, r) in mean.iter_mut().zip(self.row(id)) {
                *m += r;
            }
        }
        let n = ids.len() as f64;
        for m in &mut mean {
            *m /= n;
        }
        mean
    }

    fn pooled_soft(&self, dists: &[Vec<f64>]) -> Vec<f64> {
        if dists.is_empty() {
            return self.row(PAD).to_vec();
        }
        let mut mean = vec![0.0; self.dim];
        for dist in dists {
            debug_assert_eq!(dist.len(), self.vocab.len());
            for (id, &w) in dist.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let row = &self.emb.data[id * self.dim..(id + 1) * self.dim];
                for (m, r) in mean.iter_mut().zip(row) {
                    *m += w * r;
                }
            }
        }
        let n = dists.len() as f64;
        for m in &mut mean {
            *m /= n;
        }
        mean
    }

    /// Gradient of the unit vector w.r.t. the pooled vector, applied to
    /// `grad_unit`: `(g − (g·v̂)v̂) / ‖u‖`.
    fn pooled_grad(pooled: &[f64], grad_unit: &[f64]) -> Vec<f64> {
        let mut unit = pooled.to_vec();
        let norm = normalize(&mut unit);
        if norm == 0.0 {
            return vec![0.0; pooled.len()];
        }
        let proj: f64 = grad_unit.iter().zip(&unit).map(|(g, v)| g * v).sum();
        grad_unit
            .iter()
            .zip(&unit)
            .map(|(g, v)| (g - proj * v) / norm)
            .collect()
    }
}

impl SentenceEncoder for ReferenceEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn vocab_fingerprint(&self) -> u64 {
        self.vocab.fingerprint()
    }

    fn embed_text(&self, text: &str) -> Vec<f64> {
        self.embed_tokens(&self.vocab.encode(text))
    }
}

impl EncoderHandle for ReferenceEncoder {
    fn trainable(&self) -> bool {
        self.trainable
    }

    fn embed_tokens(&self, ids: &[u32]) -> Vec<f64> {
        let mut v = self.pooled(ids);
        normalize(&mut v);
        v
    }

    fn embed_soft(&self, dists: &[Vec<f64>]) -> Vec<f64> {
        let mut v = self.pooled_soft(dists);
        normalize(&mut v);
        v
    }

    fn soft_backward(&mut self, dists: &[Vec<f64>], grad_unit: &[f64]) -> Vec<Vec<f64>> {
        let pooled = self.pooled_soft(dists);
        let d_pooled = Self::pooled_grad(&pooled, grad_unit);
        let n = dists.len().max(1) as f64;
        // d pooled / d dist[t][id] = emb[id] / n, identical across positions.
        let mut per_id = vec![0.0; self.vocab.len()];
        for (id, slot) in per_id.iter_mut().enumerate() {
            let row = &self.emb.data[id * self.dim..(id + 1) * self.dim];
            *slot = row.iter().zip(&d_pooled).map(|(r, d)| r * d).sum::<f64>() / n;
        }
        if self.trainable {
            let dim = self.dim;
            let mut weights = vec![0.0; self.vocab.len()];
            for dist in dists {
                for (w, &d) in weights.iter_mut().zip(dist) {
                    *w += d;
                }
            }
            let g = self.emb.grad_mut();
            for (id, &w) in weights.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let row = &mut g[id * dim..(id + 1) * dim];
                for (gi, di) in row.iter_mut().zip(&d_pooled) {
                    *gi += (w / n) * di;
                }
            }
        }
        dists.iter().map(|_| per_id.clone()).collect()
    }

    fn tokens_backward(&mut self, ids: &[u32], grad_unit: &[f64]) {
        if !self.trainable || ids.is_empty() {
            return;
        }
        let pooled = self.pooled(ids);
        let d_pooled = Self::pooled_grad(&pooled, grad_unit);
        let n = ids.len() as f64;
        let dim = self.dim;
        let g = self.emb.grad_mut();
        for &id in ids {
            let row = &mut g[id as usize * dim..(id as usize + 1) * dim];
            for (gi, di) in row.iter_mut().zip(&d_pooled) {
                *gi += di / n;
            }
        }
    }

    fn zero_grad(&mut self) {
        self.emb.zero_grad();
    }

    fn opt_step(&mut self, lr: f64, step: u64) {
        self.emb.adam_step(lr, step);
    }

    fn param_counts(&self) -> ParamCounts {
        ParamCounts {
            total: self.emb.len(),
            trainable: self.emb.trainable_count(),
        }
    }
}
