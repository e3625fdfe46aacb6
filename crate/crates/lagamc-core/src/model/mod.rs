//! Model abstractions and the bundled reference implementations.
//!
//! Training and inference never touch a concrete network directly; they go
//! through the handle traits below so larger models can be plugged in. The
//! repo ships a small encoder-decoder generator ([`ReferenceGenerator`])
//! and a bag-of-token-embeddings sentence encoder ([`ReferenceEncoder`])
//! so the full pipeline and all tests run with no downloads.

mod encoder;
mod generator;
mod param;
mod vocab;

pub use encoder::ReferenceEncoder;
pub use generator::{GeneratorConfig, ReferenceGenerator};
pub use param::{Linear, Param};
pub use vocab::{Vocab, BOS, EOS, PAD, UNK};

use alloc::string::String;
use alloc::vec::Vec;

/// Total vs trainable parameter counts for a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ParamCounts {
    pub total: usize,
    pub trainable: usize,
}

impl ParamCounts {
    pub fn trainable_fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.trainable as f64 / self.total as f64
        }
    }
}

impl core::ops::Add for ParamCounts {
    type Output = ParamCounts;
    fn add(self, rhs: ParamCounts) -> ParamCounts {
        ParamCounts {
            total: self.total + rhs.total,
            trainable: self.trainable + rhs.trainable,
        }
    }
}

/// Teacher-forced forward pass result: the mean token-level cross-entropy
/// and one output distribution per position (positions `0..target.len()`
/// predict the target tokens; the final position predicts end-of-sequence).
#[derive(Debug, Clone)]
pub struct TeacherStep {
    pub ce: f64,
    pub probs: Vec<Vec<f64>>,
}

/// Inference surface of a generator: tokenization plus greedy decoding.
pub trait TextGenerator {
    /// Fingerprint of the vocabulary; paired components must agree.
    fn vocab_fingerprint(&self) -> u64;
    fn tokenize(&self, text: &str) -> Vec<u32>;
    /// Greedy decode, stopping at end-of-sequence or `max_output_tokens`.
    fn generate(&self, prompt: &[u32], max_output_tokens: usize) -> String;
}

/// Full training surface of a generator.
///
/// `backward_logits` must be called with gradients aligned to the
/// distributions returned by the immediately preceding `teacher_forward`;
/// the handle keeps the activations of that one pass.
pub trait GeneratorHandle: TextGenerator {
    fn teacher_forward(&mut self, prompt: &[u32], target: &[u32]) -> TeacherStep;
    /// Accumulate parameter gradients from per-position logit gradients.
    fn backward_logits(&mut self, grad_logits: &[Vec<f64>]);
    fn zero_grad(&mut self);
    fn opt_step(&mut self, lr: f64, step: u64);
    fn param_counts(&self) -> ParamCounts;
}

/// Inference surface of a sentence encoder: unit-norm embeddings of text.
pub trait SentenceEncoder {
    fn dim(&self) -> usize;
    fn vocab_fingerprint(&self) -> u64;
    /// Unit-norm embedding of a text.
    fn embed_text(&self, text: &str) -> Vec<f64>;
}

/// Full training surface of a sentence encoder, including the soft
/// (expected-token mixture) path that makes the semantic loss
/// differentiable into the generator.
pub trait EncoderHandle: SentenceEncoder {
    fn trainable(&self) -> bool;
    fn embed_tokens(&self, ids: &[u32]) -> Vec<f64>;
    /// Embed per-position distributions over the shared vocabulary.
    fn embed_soft(&self, dists: &[Vec<f64>]) -> Vec<f64>;
    /// Back-propagate a gradient w.r.t. the unit-norm soft embedding.
    /// Accumulates encoder parameter gradients (when trainable) and
    /// returns the gradient w.r.t. each distribution entry.
    fn soft_backward(&mut self, dists: &[Vec<f64>], grad_unit: &[f64]) -> Vec<Vec<f64>>;
    /// Back-propagate a gradient w.r.t. the unit-norm embedding of a
    /// token sequence into the encoder parameters.
    fn tokens_backward(&mut self, ids: &[u32], grad_unit: &[f64]);
    fn zero_grad(&mut self);
    fn opt_step(&mut self, lr: f64, step: u64);
    fn param_counts(&self) -> ParamCounts;
}

/// Normalize in place; returns the pre-normalization norm. Vectors with
/// vanishing norm become the first basis vector so callers always get a
/// unit vector back.
pub(crate) fn normalize(v: &mut [f64]) -> f64 {
    let norm = libm::sqrt(v.iter().map(|&x| x * x).sum::<f64>());
    if norm < 1e-12 {
        for x in v.iter_mut() {
            *x = 0.0;
        }
        if let Some(first) = v.first_mut() {
            *first = 1.0;
        }
        return 0.0;
    }
    for x in v.iter_mut() {
        *x /= norm;
    }
    norm
}

pub(crate) fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in logits.iter_mut() {
        *x = libm::exp(*x - max);
        sum += *x;
    }
    for x in logits.iter_mut() {
        *x /= sum;
    }
}

pub(crate) fn tanh_in_place(v: &mut [f64]) {
    for x in v.iter_mut() {
        *x = libm::tanh(*x);
    }
}
