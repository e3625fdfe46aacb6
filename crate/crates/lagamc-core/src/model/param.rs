//! Trainable parameter storage and the dense layer used by the reference
//! models, with optional low-rank adaptation.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::rng::Rng;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// A flat parameter block with its gradient and Adam moments. Only the
/// values and the trainable flag are serialized; optimizer state is
/// rebuilt lazily after load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub data: Vec<f64>,
    pub trainable: bool,
    #[serde(skip)]
    grad: Vec<f64>,
    #[serde(skip)]
    m1: Vec<f64>,
    #[serde(skip)]
    m2: Vec<f64>,
}

impl Param {
    pub fn zeros(len: usize) -> Self {
        Param {
            data: vec![0.0; len],
            trainable: true,
            grad: Vec::new(),
            m1: Vec::new(),
            m2: Vec::new(),
        }
    }

    pub fn randn(len: usize, std: f64, rng: &mut Rng) -> Self {
        let data = (0..len).map(|_| rng.next_gaussian() * std).collect();
        Param {
            data,
            trainable: true,
            grad: Vec::new(),
            m1: Vec::new(),
            m2: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn ensure_buffers(&mut self) {
        if self.grad.len() != self.data.len() {
            self.grad = vec![0.0; self.data.len()];
            self.m1 = vec![0.0; self.data.len()];
            self.m2 = vec![0.0; self.data.len()];
        }
    }

    pub fn zero_grad(&mut self) {
        self.ensure_buffers();
        for g in &mut self.grad {
            *g = 0.0;
        }
    }

    pub fn grad_mut(&mut self) -> &mut [f64] {
        self.ensure_buffers();
        &mut self.grad
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    /// One Adam update with bias correction. `step` is 1-based.
    pub fn adam_step(&mut self, lr: f64, step: u64) {
        if !self.trainable {
            return;
        }
        self.ensure_buffers();
        let t = step as f64;
        let bc1 = 1.0 - libm::pow(BETA1, t);
        let bc2 = 1.0 - libm::pow(BETA2, t);
        for i in 0..self.data.len() {
            let g = self.grad[i];
            self.m1[i] = BETA1 * self.m1[i] + (1.0 - BETA1) * g;
            self.m2[i] = BETA2 * self.m2[i] + (1.0 - BETA2) * g * g;
            let mhat = self.m1[i] / bc1;
            let vhat = self.m2[i] / bc2;
            self.data[i] -= lr * mhat / (libm::sqrt(vhat) + ADAM_EPS);
        }
    }

    pub fn trainable_count(&self) -> usize {
        if self.trainable {
            self.data.len()
        } else {
            0
        }
    }
}

/// Low-rank adapter: `Δ = (alpha / rank) · up · down`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lora {
    pub rank: usize,
    pub scale: f64,
    /// rank × in_dim
    pub down: Param,
    /// out_dim × rank
    pub up: Param,
}

/// Dense layer `y = W·x + b`, optionally augmented with a low-rank
/// adapter. Attaching an adapter freezes the base weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    w: Param,
    b: Param,
    lora: Option<Lora>,
}

impl Linear {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut Rng) -> Self {
        let std = 1.0 / libm::sqrt(in_dim as f64);
        Linear {
            in_dim,
            out_dim,
            w: Param::randn(out_dim * in_dim, std, rng),
            b: Param::zeros(out_dim),
            lora: None,
        }
    }

    /// Freeze the base weights and add a rank-`rank` adapter. The down
    /// projection starts random, the up projection at zero, so the layer's
    /// function is unchanged at attach time.
    pub fn attach_lora(&mut self, rank: usize, rng: &mut Rng) {
        assert!(rank > 0, "adapter rank must be positive");
        self.w.trainable = false;
        self.b.trainable = false;
        let std = 1.0 / libm::sqrt(self.in_dim as f64);
        self.lora = Some(Lora {
            rank,
            scale: 2.0,
            down: Param::randn(rank * self.in_dim, std, rng),
            up: Param::zeros(self.out_dim * rank),
        });
    }

    pub fn has_lora(&self) -> bool {
        self.lora.is_some()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        let mut y = Vec::with_capacity(self.out_dim);
        for o in 0..self.out_dim {
            let row = &self.w.data[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.b.data[o];
            for (wi, xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            y.push(acc);
        }
        if let Some(lora) = &self.lora {
            let mut t = vec![0.0; lora.rank];
            for (tr, row) in t.iter_mut().zip(lora.down.data.chunks_exact(self.in_dim)) {
                *tr = row.iter().zip(x).map(|(a, b)| a * b).sum();
            }
            for (yo, row) in y.iter_mut().zip(lora.up.data.chunks_exact(lora.rank)) {
                let delta: f64 = row.iter().zip(&t).map(|(a, b)| a * b).sum();
                *yo += lora.scale * delta;
            }
        }
        y
    }

    /// Accumulate parameter gradients and return dL/dx.
    pub fn backward(&mut self, x: &[f64], dy: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        debug_assert_eq!(dy.len(), self.out_dim);
        let mut dx = vec![0.0; self.in_dim];
        // dL/dx through the base weights.
        for (row, &g) in self.w.data.chunks_exact(self.in_dim).zip(dy) {
            for (dxi, wi) in dx.iter_mut().zip(row) {
                *dxi += wi * g;
            }
        }
        if self.w.trainable {
            let in_dim = self.in_dim;
            let wg = self.w.grad_mut();
            for (row, &g) in wg.chunks_exact_mut(in_dim).zip(dy) {
                for (wgi, xi) in row.iter_mut().zip(x) {
                    *wgi += g * xi;
                }
            }
            let bg = self.b.grad_mut();
            for (bgi, g) in bg.iter_mut().zip(dy) {
                *bgi += g;
            }
        }
        if let Some(lora) = &mut self.lora {
            let rank = lora.rank;
            let scale = lora.scale;
            let mut t = vec![0.0; rank];
            for (tr, row) in t.iter_mut().zip(lora.down.data.chunks_exact(self.in_dim)) {
                *tr = row.iter().zip(x).map(|(a, b)| a * b).sum();
            }
            // dt = scale · upᵀ · dy
            let mut dt = vec![0.0; rank];
            for (row, &g) in lora.up.data.chunks_exact(rank).zip(dy) {
                for (dtr, ur) in dt.iter_mut().zip(row) {
                    *dtr += ur * scale * g;
                }
            }
            let ug = lora.up.grad_mut();
            for (row, &g) in ug.chunks_exact_mut(rank).zip(dy) {
                for (ugr, tr) in row.iter_mut().zip(&t) {
                    *ugr += scale * g * tr;
                }
            }
            let in_dim = self.in_dim;
            let dg = lora.down.grad_mut();
            for (row, &dtr) in dg.chunks_exact_mut(in_dim).zip(&dt) {
                for (dgi, xi) in row.iter_mut().zip(x) {
                    *dgi += dtr * xi;
                }
            }
            for (row, &dtr) in lora.down.data.chunks_exact(self.in_dim).zip(&dt) {
                for (dxi, di) in dx.iter_mut().zip(row) {
                    *dxi += di * dtr;
                }
            }
        }
        dx
    }

    pub fn zero_grad(&mut self) {
        self.w.zero_grad();
        self.b.zero_grad();
        if let Some(lora) = &mut self.lora {
            lora.down.zero_grad();
            lora.up.zero_grad();
        }
    }

    pub fn adam_step(&mut self, lr: f64, step: u64) {
        self.w.adam_step(lr, step);
        self.b.adam_step(lr, step);
        if let Some(lora) = &mut self.lora {
            lora.down.adam_step(lr, step);
            lora.up.adam_step(lr, step);
        }
    }

    pub fn param_counts(&self) -> super::ParamCounts {
        let mut total = self.w.len() + self.b.len();
        let mut trainable = self.w.trainable_count() + self.b.trainable_count();
        if let Some(lora) = &self.lora {
            total += lora.down.len() + lora.up.len();
            trainable += lora.down.trainable_count() + lora.up.trainable_count();
        }
        super::ParamCounts { total, trainable }
    }
}
