//! Shared helpers for integration tests: tiny random models, random batches,
//! and the central finite-difference gradient oracle.

use packsense::dataio::{Label, TimeWindow, AXES};
use packsense::nnet::{
    backward, BatchNorm1d, Conv1d, Dense, FloatModel, Layer, TrainConfig,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A tiny 2-block conv net on V_l = 16 for gradient checking.
pub fn tiny_model(seed: u64) -> FloatModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();
    let widths = [3usize, 4, 6];
    for i in 0..2 {
        let mut conv = Conv1d::new(widths[i + 1], widths[i], 3, 1, 1);
        for w in conv.weights.iter_mut() {
            *w = rng.random_range(-0.5f32..0.5);
        }
        for b in conv.bias.iter_mut() {
            *b = rng.random_range(-0.1f32..0.1);
        }
        layers.push(Layer::Conv1d(conv));
        let mut bn = BatchNorm1d::identity(widths[i + 1]);
        for g in bn.gamma.iter_mut() {
            *g = rng.random_range(0.5f32..1.5);
        }
        for b in bn.beta.iter_mut() {
            *b = rng.random_range(-0.3f32..0.3);
        }
        layers.push(Layer::BatchNorm1d(bn));
        layers.push(Layer::Relu);
    }
    layers.push(Layer::GlobalAvgPool);
    let mut dense = Dense::new(3, widths[2]);
    for w in dense.weights.iter_mut() {
        *w = rng.random_range(-0.5f32..0.5);
    }
    layers.push(Layer::Dense(dense));
    FloatModel::new(16, 3, layers).unwrap()
}

pub fn random_batch(seed: u64, n: usize, v_l: usize) -> Vec<TimeWindow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let values: Vec<f32> = (0..v_l * AXES)
                .map(|_| rng.random_range(-1.0f32..1.0))
                .collect();
            TimeWindow::new(values, v_l, Some(Label::from_index(i % 3).unwrap())).unwrap()
        })
        .collect()
}

/// Batch loss as a pure function of the parameters (train-mode batch norm),
/// used as the finite-difference target.
pub fn batch_loss_at(
    model: &FloatModel,
    params: &[f32],
    batch: &[TimeWindow],
    cfg: &TrainConfig,
) -> f64 {
    let mut m = model.clone();
    m.set_params_flat(params).unwrap();
    let (_, loss) = backward(&mut m, batch, cfg).unwrap();
    loss
}

/// Central finite differences with h = 1e-3. Returns, per parameter, the
/// analytic and numeric gradients.
#[allow(dead_code)]
pub fn gradient_pairs(
    model: &FloatModel,
    batch: &[TimeWindow],
    cfg: &TrainConfig,
) -> Vec<(f64, f64)> {
    let mut m = model.clone();
    let (grads, _) = backward(&mut m, batch, cfg).unwrap();
    let analytic = grads.flat();
    let params = model.params_flat();
    let h = 1e-3f32;
    let mut pairs = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let mut plus = params.clone();
        plus[i] += h;
        let mut minus = params.clone();
        minus[i] -= h;
        let fd = (batch_loss_at(model, &plus, batch, cfg)
            - batch_loss_at(model, &minus, batch, cfg))
            / (2.0 * h as f64);
        pairs.push((analytic[i] as f64, fd));
    }
    pairs
}

/// Scale-aware relative error with a unit floor (the loss is O(1)).
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Number of parameters whose analytic gradient disagrees with central
/// finite differences at every step size in `steps` (plus the total count).
///
/// Trying several step sizes separates truncation error from real
/// disagreement: a correct analytic gradient matches at some h, while a
/// wrong one matches at none.
#[allow(dead_code)]
pub fn fd_mismatch_count(
    model: &FloatModel,
    batch: &[TimeWindow],
    cfg: &TrainConfig,
    steps: &[f32],
    tol: f64,
) -> (usize, usize) {
    let mut m = model.clone();
    let (grads, _) = backward(&mut m, batch, cfg).unwrap();
    let analytic = grads.flat();
    let params = model.params_flat();
    let mut bad = 0;
    for i in 0..params.len() {
        let ok = steps.iter().any(|&h| {
            let mut plus = params.clone();
            plus[i] += h;
            let mut minus = params.clone();
            minus[i] -= h;
            let fd = (batch_loss_at(model, &plus, batch, cfg)
                - batch_loss_at(model, &minus, batch, cfg))
                / (2.0 * h as f64);
            rel_err(analytic[i] as f64, fd) <= tol
        });
        if !ok {
            bad += 1;
        }
    }
    (bad, params.len())
}
