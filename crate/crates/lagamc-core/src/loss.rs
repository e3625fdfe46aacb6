//! The hybrid training loss: a convex combination of token-level
//! cross-entropy and a semantic term `1 − CosSim(v_gen, v_target)`, mixed
//! by a learnable weight `λ ∈ (0, 1)`.

use core::fmt;

use libm::exp;
use serde::{Deserialize, Serialize};

/// Learnable mixing weight, stored as an unconstrained scalar and squashed
/// through a sigmoid so `value()` always lies strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingWeight {
    raw: f64,
}

impl MixingWeight {
    /// Start from an explicit target value in `(0, 1)`.
    pub fn from_value(value: f64) -> Result<Self, LossError> {
        if !(value > 0.0 && value < 1.0) {
            return Err(LossError::MixingWeightOutOfRange { value });
        }
        Ok(MixingWeight {
            raw: libm::log(value / (1.0 - value)),
        })
    }

    pub fn from_raw(raw: f64) -> Self {
        MixingWeight { raw }
    }

    pub fn raw(&self) -> f64 {
        self.raw
    }

    /// λ = sigmoid(raw), with the raw value clamped so the result stays
    /// strictly inside (0, 1) even where the sigmoid would underflow.
    /// Monotone in `raw` (strictly so until the clamp engages).
    pub fn value(&self) -> f64 {
        sigmoid(self.raw.clamp(-30.0, 30.0))
    }

    /// dλ/d raw, used when back-propagating into the raw parameter.
    pub fn value_grad(&self) -> f64 {
        let v = self.value();
        v * (1.0 - v)
    }

    pub fn add_raw(&mut self, delta: f64) {
        self.raw += delta;
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// `1 − ⟨v_gen, v_target⟩` over unit vectors; range `[0, 2]`.
pub fn semantic_loss(v_gen: &[f64], v_target: &[f64]) -> Result<f64, LossError> {
    Ok(1.0 - cosine(v_gen, v_target)?)
}

/// Cosine of two unit vectors (their dot product). Rejects dimension
/// mismatches and zero vectors.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, LossError> {
    if a.len() != b.len() {
        return Err(LossError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.iter().all(|&x| x == 0.0) || b.iter().all(|&x| x == 0.0) {
        return Err(LossError::ZeroVector);
    }
    Ok(dot(a, b))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// `λ·ce + (1−λ)·sem` with `λ = lam.value()`.
pub fn hybrid_loss(ce: f64, sem: f64, lam: &MixingWeight) -> Result<f64, LossError> {
    if !ce.is_finite() || !sem.is_finite() {
        return Err(LossError::NonFinite { ce, sem });
    }
    let v = lam.value();
    Ok(v * ce + (1.0 - v) * sem)
}

/// d hybrid / d raw, holding `ce` and `sem` fixed.
pub fn hybrid_loss_raw_grad(ce: f64, sem: f64, lam: &MixingWeight) -> f64 {
    (ce - sem) * lam.value_grad()
}

#[derive(Debug, Clone, PartialEq)]
pub enum LossError {
    DimensionMismatch { left: usize, right: usize },
    ZeroVector,
    NonFinite { ce: f64, sem: f64 },
    MixingWeightOutOfRange { value: f64 },
}

impl fmt::Display for LossError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossError::DimensionMismatch { left, right } => {
                write!(f, "embedding dimensions differ: {left} vs {right}")
            }
            LossError::ZeroVector => write!(f, "cosine of a zero vector is undefined"),
            LossError::NonFinite { ce, sem } => {
                write!(f, "non-finite loss inputs: ce={ce}, sem={sem}")
            }
            LossError::MixingWeightOutOfRange { value } => {
                write!(f, "mixing weight {value} outside (0, 1)")
            }
        }
    }
}

impl core::error::Error for LossError {}
