//! A self-contained 1D-CNN: forward pass, exact backpropagation, and the
//! SGD + momentum training routine with label-smoothed, class-weighted
//! cross-entropy.

mod model;
mod train;

pub use model::{
    default_architecture, BatchNorm1d, Conv1d, Dense, FloatModel, Gradients, Layer, LayerGrad,
    Mode, WeightMask,
};
pub use train::{
    backward, class_weights_from, eval_probs, train, train_with_options, EpochStats, TrainConfig,
    TrainHistory, TrainOptions,
};

use crate::error::{Error, Result};

/// A probability vector over the classes.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftDecision {
    pub probs: Vec<f32>,
}

impl SoftDecision {
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Numerically stable softmax: `p_i = exp(x_i - max) / sum`.
pub fn softmax(logits: &[f32]) -> SoftDecision {
    let max = logits.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    let exps: Vec<f32> = logits.iter().map(|&x| (x - max).exp()).collect();
    let sum: f32 = exps.iter().sum();
    SoftDecision {
        probs: exps.iter().map(|&e| e / sum).collect(),
    }
}

/// Probabilities below this are clamped inside the loss to avoid `log(0)`.
pub const PROB_CLAMP: f64 = 1e-12;

/// Label-smoothed, class-weighted cross-entropy for one decision:
/// `loss = w[label] * sum_i -q_i * log(p_i)` with
/// `q_i = (1-eps)*[i==label] + eps/C`.
pub fn loss(
    probs: &SoftDecision,
    label: usize,
    class_weight: f64,
    label_smoothing: f64,
) -> Result<f64> {
    let c = probs.probs.len();
    if label >= c {
        return Err(Error::Invariant(format!(
            "label {label} out of range for {c} classes"
        )));
    }
    let eps = label_smoothing;
    let mut total = 0.0;
    for (i, &p) in probs.probs.iter().enumerate() {
        let q = if i == label { 1.0 - eps + eps / c as f64 } else { eps / c as f64 };
        if q > 0.0 {
            total -= q * (p as f64).max(PROB_CLAMP).ln();
        }
    }
    Ok(class_weight * total)
}
