//! Bundled reference generator: a small encoder-decoder.
//!
//! The input side mean-pools token embeddings into a context vector and
//! passes it through one dense layer; the decoder predicts each output
//! token from the previous target token and that context (teacher forcing
//! during training, greedy feedback during generation). It is deliberately
//! small: a test vehicle for the training and matching machinery, with
//! the same handle surface a large model would sit behind.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::param::{Linear, Param};
use super::vocab::{Vocab, BOS, EOS};
use super::{
    softmax_in_place, tanh_in_place, GeneratorHandle, ParamCounts, TeacherStep, TextGenerator,
};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub emb_dim: usize,
    pub hidden_dim: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            emb_dim: 32,
            hidden_dim: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceGenerator {
    vocab: Arc<Vocab>,
    config: GeneratorConfig,
    emb: Param,
    ctx_proj: Linear,
    dec: Linear,
    out: Linear,
    #[serde(skip)]
    cache: Option<Cache>,
}

#[derive(Debug, Clone, PartialEq)]
struct Cache {
    prompt: Vec<u32>,
    ctx_mean: Vec<f64>,
    ctx: Vec<f64>,
    prev_ids: Vec<u32>,
    states: Vec<Vec<f64>>,
}

impl ReferenceGenerator {
    pub fn new(vocab: Arc<Vocab>, config: GeneratorConfig, seed: u64) -> Self {
        let mut rng = Rng::derive(seed, 0x47454e);
        let v = vocab.len();
        let e = config.emb_dim;
        let emb = Param::randn(v * e, 1.0 / libm::sqrt(e as f64), &mut rng);
        let ctx_proj = Linear::new(e, e, &mut rng);
        let dec = Linear::new(2 * e, config.hidden_dim, &mut rng);
        let out = Linear::new(config.hidden_dim, v, &mut rng);
        ReferenceGenerator {
            vocab,
            config,
            emb,
            ctx_proj,
            dec,
            out,
            cache: None,
        }
    }

    pub fn vocab(&self) -> &Arc<Vocab> {
        &self.vocab
    }

    pub fn config(&self) -> GeneratorConfig {
        self.config
    }

    /// Freeze the base network and attach rank-`rank` adapters to the
    /// three dense layers. Embeddings freeze too; only the adapters train.
    pub fn attach_lora(&mut self, rank: usize, seed: u64) {
        let mut rng = Rng::derive(seed, 0x4c6f5261);
        self.emb.trainable = false;
        self.ctx_proj.attach_lora(rank, &mut rng);
        self.dec.attach_lora(rank, &mut rng);
        self.out.attach_lora(rank, &mut rng);
    }

    pub fn has_lora(&self) -> bool {
        self.out.has_lora()
    }

    fn emb_row(&self, id: u32) -> &[f64] {
        let e = self.config.emb_dim;
        &self.emb.data[id as usize * e..(id as usize + 1) * e]
    }

    fn context(&self, prompt: &[u32]) -> (Vec<f64>, Vec<f64>) {
        let e = self.config.emb_dim;
        let mut mean = vec![0.0; e];
        if !prompt.is_empty() {
            for &id in prompt {
                let row = self.emb_row(id);
                for (m, r) in mean.iter_mut().zip(row) {
                    *m += r;
                }
            }
            let n = prompt.len() as f64;
            for m in &mut mean {
                *m /= n;
            }
        }
        let mut ctx = self.ctx_proj.forward(&mean);
        tanh_in_place(&mut ctx);
        (mean, ctx)
    }

    fn step_logits(&self, prev: u32, ctx: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let e = self.config.emb_dim;
        let mut x = Vec::with_capacity(2 * e);
        x.extend_from_slice(self.emb_row(prev));
        x.extend_from_slice(ctx);
        let mut state = self.dec.forward(&x);
        tanh_in_place(&mut state);
        let logits = self.out.forward(&state);
        (state, logits)
    }
}

impl TextGenerator for ReferenceGenerator {
    fn vocab_fingerprint(&self) -> u64 {
        self.vocab.fingerprint()
    }

    fn tokenize(&self, text: &str) -> Vec<u32> {
        self.vocab.encode(text)
    }

    fn generate(&self, prompt: &[u32], max_output_tokens: usize) -> String {
        let (_, ctx) = self.context(prompt);
        let mut prev = BOS;
        let mut out_ids = Vec::new();
        for _ in 0..max_output_tokens {
            let (_, logits) = self.step_logits(prev, &ctx);
            let next = argmax(&logits);
            if next == EOS {
                break;
            }
            out_ids.push(next);
            prev = next;
        }
        self.vocab.decode(&out_ids)
    }
}

/// Lowest index wins ties, which keeps decoding deterministic.
fn argmax(logits: &[f64]) -> u32 {
    let mut best = 0usize;
    let mut best_v = f64::NEG_INFINITY;
    for (i, &v) in logits.iter().enumerate() {
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    best as u32
}

impl GeneratorHandle for ReferenceGenerator {
    fn teacher_forward(&mut self, prompt: &[u32], target: &[u32]) -> TeacherStep {
        let (ctx_mean, ctx) = self.context(prompt);
        let n_pos = target.len() + 1;
        let mut prev_ids = Vec::with_capacity(n_pos);
        let mut states = Vec::with_capacity(n_pos);
        let mut probs = Vec::with_capacity(n_pos);
        let mut ce = 0.0;
        for t in 0..n_pos {
            let prev = if t == 0 { BOS } else { target[t - 1] };
            let predicted = if t < target.len() { target[t] } else { EOS };
            let (state, mut logits) = self.step_logits(prev, &ctx);
            softmax_in_place(&mut logits);
            let p = logits[predicted as usize].max(1e-300);
            ce -= libm::log(p);
            prev_ids.push(prev);
            states.push(state);
            probs.push(logits);
        }
        ce /= n_pos as f64;
        self.cache = Some(Cache {
            prompt: prompt.to_vec(),
            ctx_mean,
            ctx,
            prev_ids,
            states,
        });
        TeacherStep { ce, probs }
    }

    fn backward_logits(&mut self, grad_logits: &[Vec<f64>]) {
        let cache = self
            .cache
            .take()
            .expect("backward_logits without a preceding teacher_forward");
        assert_eq!(
            grad_logits.len(),
            cache.states.len(),
            "gradient/position count mismatch"
        );
        let e = self.config.emb_dim;
        let mut d_ctx = vec![0.0; e];
        for (t, dy) in grad_logits.iter().enumerate() {
            let state = &cache.states[t];
            let mut ds = self.out.backward(state, dy);
            for (dsi, si) in ds.iter_mut().zip(state) {
                *dsi *= 1.0 - si * si;
            }
            let prev = cache.prev_ids[t];
            let mut x = Vec::with_capacity(2 * e);
            x.extend_from_slice(self.emb_row(prev));
            x.extend_from_slice(&cache.ctx);
            let dx = self.dec.backward(&x, &ds);
            if self.emb.trainable {
                let g = self.emb.grad_mut();
                let row = &mut g[prev as usize * e..(prev as usize + 1) * e];
                for (gi, di) in row.iter_mut().zip(&dx[..e]) {
                    *gi += di;
                }
            }
            for (dc, di) in d_ctx.iter_mut().zip(&dx[e..]) {
                *dc += di;
            }
        }
        for (dc, ci) in d_ctx.iter_mut().zip(&cache.ctx) {
            *dc *= 1.0 - ci * ci;
        }
        let d_mean = self.ctx_proj.backward(&cache.ctx_mean, &d_ctx);
        if self.emb.trainable && !cache.prompt.is_empty() {
            let n = cache.prompt.len() as f64;
            let g = self.emb.grad_mut();
            for &id in &cache.prompt {
                let row = &mut g[id as usize * e..(id as usize + 1) * e];
                for (gi, di) in row.iter_mut().zip(&d_mean) {
                    *gi += di / n;
                }
            }
        }
    }

    fn zero_grad(&mut self) {
        self.emb.zero_grad();
        self.ctx_proj.zero_grad();
        self.dec.zero_grad();
        self.out.zero_grad();
    }

    fn opt_step(&mut self, lr: f64, step: u64) {
        self.emb.adam_step(lr, step);
        self.ctx_proj.adam_step(lr, step);
        self.dec.adam_step(lr, step);
        self.out.adam_step(lr, step);
    }

    fn param_counts(&self) -> ParamCounts {
        let emb = ParamCounts {
            total: self.emb.len(),
            trainable: self.emb.trainable_count(),
        };
        emb + self.ctx_proj.param_counts() + self.dec.param_counts() + self.out.param_counts()
    }
}
