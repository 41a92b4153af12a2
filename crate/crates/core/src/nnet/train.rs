//! SGD + momentum training loop with step LR decay and optional weight
//! masking (used by prune-and-rewind retraining).

use crate::dataio::{Label, LabeledDataset, TimeWindow, NUM_CLASSES};
use crate::decide;
use crate::error::{Error, Result};
use crate::nnet::model::{
    backward_batch, forward_batch, forward_eval_batch, Feat, FloatModel, Gradients, Layer,
    LayerGrad, Mode, WeightMask,
};
use crate::nnet::{loss, softmax, SoftDecision};
use crate::rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

/// Training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub label_smoothing: f64,
    /// Per-class loss weights, indexed by `Label::index()`.
    pub class_weights: Vec<f64>,
    /// The learning rate is multiplied by `lr_decay_factor` every
    /// `lr_decay_period` epochs: `lr(e) = lr0 * factor^(e / period)`.
    pub lr_decay_factor: f64,
    pub lr_decay_period: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 200,
            learning_rate: 0.5,
            momentum: 0.9,
            weight_decay: 2e-5,
            label_smoothing: 0.1,
            class_weights: vec![1.0; NUM_CLASSES],
            lr_decay_factor: 0.5,
            lr_decay_period: 5,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(Error::Config("label_smoothing must be in [0,1)".into()));
        }
        if self.class_weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::Config("class weights must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.lr_decay_period == 0 {
            return Err(Error::Config("lr_decay_period must be >= 1".into()));
        }
        Ok(())
    }

    /// Learning rate in effect during 0-based epoch `e`.
    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        self.learning_rate * self.lr_decay_factor.powi((epoch / self.lr_decay_period) as i32)
    }

    /// Learning rate of the final epoch, retained by rewind retraining.
    pub fn final_epoch_lr(&self) -> f64 {
        if self.epochs == 0 {
            self.learning_rate
        } else {
            self.lr_at_epoch(self.epochs - 1)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    /// (precision, recall) for each target class on the validation set,
    /// from unthresholded argmax predictions.
    pub val_precision: Vec<f64>,
    pub val_recall: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    pub final_lr: f64,
}

impl TrainHistory {
    /// CSV rendering: epoch, lr, train loss, val loss, per-class P/R.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "epoch,lr,train_loss,val_loss,precision_forklift,recall_forklift,precision_truck,recall_truck\n",
        );
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                e.epoch,
                e.lr,
                e.train_loss,
                e.val_loss,
                e.val_precision.first().copied().unwrap_or(0.0),
                e.val_recall.first().copied().unwrap_or(0.0),
                e.val_precision.get(1).copied().unwrap_or(0.0),
                e.val_recall.get(1).copied().unwrap_or(0.0),
            ));
        }
        out
    }
}

/// Inverse-frequency class weights `w_c = N / (C * count_c)` over `classes`;
/// the per-sample mean weight (`sum_c count_c * w_c / N`) is 1. Entries for
/// classes outside `classes` are 1. Errors if a requested class is absent.
pub fn class_weights_from(ds: &LabeledDataset, classes: &[Label]) -> Result<Vec<f64>> {
    let mut weights = vec![1.0; NUM_CLASSES];
    let total: usize = classes.iter().map(|&c| ds.class_count(c)).sum();
    let c = classes.len();
    if c == 0 {
        return Err(Error::Config("no classes given".into()));
    }
    for &class in classes {
        let count = ds.class_count(class);
        if count == 0 {
            return Err(Error::EmptyDataset(format!(
                "class {} missing from dataset",
                class.name()
            )));
        }
        weights[class.index()] = total as f64 / (c as f64 * count as f64);
    }
    Ok(weights)
}

fn dataset_feats(ds: &LabeledDataset) -> (Vec<Feat>, Vec<usize>) {
    let feats = ds.windows().iter().map(Feat::from_window).collect();
    let labels = ds
        .windows()
        .iter()
        .map(|w| w.label.expect("labeled").index())
        .collect();
    (feats, labels)
}

/// Mean batch loss, per-sample probabilities, and the logit gradients of the
/// mean loss.
fn batch_loss_and_dlogits(
    outputs: &[Feat],
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<(f64, Vec<Feat>)> {
    let b = outputs.len() as f64;
    let mut total = 0.0;
    let mut dlogits = Vec::with_capacity(outputs.len());
    for (out, &label) in outputs.iter().zip(labels) {
        let probs = softmax(&out.data);
        let weight = cfg.class_weights.get(label).copied().unwrap_or(1.0);
        total += loss(&probs, label, weight, cfg.label_smoothing)?;
        let c = probs.probs.len();
        let eps = cfg.label_smoothing;
        let mut g = Feat::zeros(out.ch, out.len);
        for i in 0..c {
            let q = if i == label { 1.0 - eps + eps / c as f64 } else { eps / c as f64 };
            g.data[i] = ((weight / b) * (probs.probs[i] as f64 - q)) as f32;
        }
        dlogits.push(g);
    }
    Ok((total / b, dlogits))
}

/// Exact analytic gradients of the mean batch loss w.r.t. every parameter.
/// The model's running batch-norm statistics are updated as a side effect,
/// exactly as during a training step.
pub fn backward(
    model: &mut FloatModel,
    batch: &[TimeWindow],
    cfg: &TrainConfig,
) -> Result<(Gradients, f64)> {
    let feats: Vec<Feat> = batch.iter().map(Feat::from_window).collect();
    let labels: Vec<usize> = batch
        .iter()
        .map(|w| {
            w.label
                .map(|l| l.index())
                .ok_or_else(|| Error::Config("batch window without label".into()))
        })
        .collect::<Result<_>>()?;
    let (outputs, cache) = forward_batch(model, &feats, Mode::Train)?;
    let (loss, dlogits) = batch_loss_and_dlogits(&outputs, &labels, cfg)?;
    Ok((backward_batch(model, &cache, &dlogits), loss))
}

/// Per-parameter momentum buffers, same shapes as the gradients.
struct Velocity(Gradients);

impl Velocity {
    fn zeros(model: &FloatModel) -> Velocity {
        Velocity(Gradients::zeros_like(model))
    }
}

fn sgd_update(
    model: &mut FloatModel,
    grads: &Gradients,
    velocity: &mut Velocity,
    lr: f64,
    momentum: f64,
    weight_decay: f64,
    mask: Option<&WeightMask>,
) {
    let step = |w: &mut [f32], g: &[f32], v: &mut [f32], mask: Option<&[bool]>| {
        for i in 0..w.len() {
            if let Some(m) = mask {
                if !m[i] {
                    // Frozen position: zero weight, gradient, and momentum.
                    w[i] = 0.0;
                    v[i] = 0.0;
                    continue;
                }
            }
            let vel = momentum * v[i] as f64 + g[i] as f64 + weight_decay * w[i] as f64;
            v[i] = vel as f32;
            w[i] = (w[i] as f64 - lr * vel) as f32;
        }
    };
    let bias_step = |b: &mut [f32], g: &[f32], v: &mut [f32]| {
        for i in 0..b.len() {
            // No weight decay on biases and batch-norm parameters.
            let vel = momentum * v[i] as f64 + g[i] as f64;
            v[i] = vel as f32;
            b[i] = (b[i] as f64 - lr * vel) as f32;
        }
    };

    for (l, layer) in model.layers_mut().iter_mut().enumerate() {
        let layer_mask = mask.and_then(|m| m.layers[l].as_deref());
        match (layer, &grads.layers[l], &mut velocity.0.layers[l]) {
            (
                Layer::Conv1d(c),
                LayerGrad::Conv { dw, db },
                LayerGrad::Conv { dw: vw, db: vb },
            ) => {
                step(&mut c.weights, dw, vw, layer_mask);
                bias_step(&mut c.bias, db, vb);
            }
            (
                Layer::Dense(d),
                LayerGrad::Dense { dw, db },
                LayerGrad::Dense { dw: vw, db: vb },
            ) => {
                step(&mut d.weights, dw, vw, layer_mask);
                bias_step(&mut d.bias, db, vb);
            }
            (
                Layer::BatchNorm1d(bn),
                LayerGrad::Bn { dgamma, dbeta },
                LayerGrad::Bn {
                    dgamma: vg,
                    dbeta: vb,
                },
            ) => {
                bias_step(&mut bn.gamma, dgamma, vg);
                bias_step(&mut bn.beta, dbeta, vb);
            }
            _ => {}
        }
    }
}

/// Knobs for retraining variants.
#[derive(Debug, Clone, Default)]
pub struct TrainOptions<'a> {
    /// Constant learning rate overriding the schedule (rewind retraining).
    pub constant_lr: Option<f64>,
    /// Positions where `false` stay exactly zero through every update.
    pub mask: Option<&'a WeightMask>,
    /// Overrides `cfg.epochs`.
    pub epochs: Option<usize>,
}

/// Trains with SGD momentum and the step-decay schedule. Deterministic
/// given the seed.
pub fn train(
    model: &FloatModel,
    train_set: &LabeledDataset,
    val_set: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<(FloatModel, TrainHistory)> {
    train_with_options(model, train_set, val_set, cfg, &TrainOptions::default())
}

pub fn train_with_options(
    model: &FloatModel,
    train_set: &LabeledDataset,
    val_set: &LabeledDataset,
    cfg: &TrainConfig,
    opts: &TrainOptions,
) -> Result<(FloatModel, TrainHistory)> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyDataset("training set is empty".into()));
    }
    if let Some(mask) = opts.mask {
        if !mask.matches(model) {
            return Err(Error::Shape {
                layer: 0,
                message: "weight mask does not match model".into(),
            });
        }
    }
    let epochs = opts.epochs.unwrap_or(cfg.epochs);
    let mut model = model.clone();
    let mut history = TrainHistory {
        epochs: Vec::new(),
        final_lr: if epochs == 0 {
            opts.constant_lr.unwrap_or(cfg.learning_rate)
        } else {
            0.0
        },
    };
    if epochs == 0 {
        return Ok((model, history));
    }

    let (feats, labels) = dataset_feats(train_set);
    let mut velocity = Velocity::zeros(&model);
    let mut order: Vec<usize> = (0..feats.len()).collect();

    for epoch in 0..epochs {
        let lr = opts.constant_lr.unwrap_or_else(|| cfg.lr_at_epoch(epoch));
        let mut rng = rng::seeded(rng::derive_seed(cfg.seed, epoch as u64));
        order.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch_feats: Vec<Feat> = chunk.iter().map(|&i| feats[i].clone()).collect();
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (outputs, cache) = forward_batch(&mut model, &batch_feats, Mode::Train)?;
            let (batch_loss, dlogits) = batch_loss_and_dlogits(&outputs, &batch_labels, cfg)?;
            let grads = backward_batch(&model, &cache, &dlogits);
            sgd_update(
                &mut model,
                &grads,
                &mut velocity,
                lr,
                cfg.momentum,
                cfg.weight_decay,
                opts.mask,
            );
            epoch_loss += batch_loss;
            batches += 1;
        }

        let (val_loss, val_precision, val_recall) = if val_set.is_empty() {
            (0.0, vec![0.0; 2], vec![0.0; 2])
        } else {
            evaluate_epoch(&model, val_set, cfg)?
        };

        history.epochs.push(EpochStats {
            epoch,
            lr,
            train_loss: epoch_loss / batches.max(1) as f64,
            val_loss,
            val_precision,
            val_recall,
        });
        history.final_lr = lr;
    }

    Ok((model, history))
}

fn evaluate_epoch(
    model: &FloatModel,
    val_set: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let probs = eval_probs(model, val_set.windows())?;
    let mut total = 0.0;
    for (p, w) in probs.iter().zip(val_set.windows()) {
        let label = w.label.expect("labeled").index();
        let weight = cfg.class_weights.get(label).copied().unwrap_or(1.0);
        total += loss(p, label, weight, cfg.label_smoothing)?;
    }
    let preds: Vec<Label> = probs
        .iter()
        .map(|p| Label::from_index(p.argmax()).expect("class index"))
        .collect();
    let truth: Vec<Label> = val_set.windows().iter().map(|w| w.label.unwrap()).collect();
    let mut precision = Vec::new();
    let mut recall = Vec::new();
    for class in crate::dataio::TARGET_CLASSES {
        let (p, r) = decide::precision_recall(&preds, &truth, class);
        precision.push(p);
        recall.push(r);
    }
    Ok((total / probs.len() as f64, precision, recall))
}

/// Eval-mode class probabilities for a set of windows.
pub fn eval_probs(model: &FloatModel, windows: &[TimeWindow]) -> Result<Vec<SoftDecision>> {
    let feats: Vec<Feat> = windows.iter().map(Feat::from_window).collect();
    let outputs = forward_eval_batch(model, &feats)?;
    Ok(outputs.iter().map(|o| softmax(&o.data)).collect())
}
