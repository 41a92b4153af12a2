//! Model compression chain: global L1 magnitude pruning with weight
//! rewinding, batch-norm folding, representative-set calibration, and
//! full-integer 8-bit quantization.

use crate::dataio::{LabeledDataset, TimeWindow};
use crate::error::{Error, Result};
use crate::nnet::{
    train_with_options, FloatModel, Layer, TrainConfig, TrainHistory, TrainOptions, WeightMask,
};
use crate::rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

/// Zeroes the globally smallest-magnitude fraction `ratio` of the conv and
/// dense weights (biases and batch-norm parameters are never pruned).
/// Exactly `floor(ratio * N)` positions are masked; magnitude ties break by
/// ascending (layer index, flat index).
pub fn prune_l1(model: &FloatModel, ratio: f64) -> Result<(FloatModel, WeightMask)> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::Config(format!("prune ratio {ratio} not in [0,1)")));
    }
    let mut mask = WeightMask::all_kept(model);
    let mut ranked: Vec<(f32, usize, usize)> = Vec::new();
    for (l, layer) in model.layers().iter().enumerate() {
        let weights = match layer {
            Layer::Conv1d(c) => &c.weights,
            Layer::Dense(d) => &d.weights,
            _ => continue,
        };
        for (i, w) in weights.iter().enumerate() {
            ranked.push((w.abs(), l, i));
        }
    }
    let n_prune = (ratio * ranked.len() as f64).floor() as usize;
    // Sort is stable on equal keys; the (layer, index) push order already
    // gives the documented tie-breaking.
    ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite weights"));
    let mut pruned = model.clone();
    for &(_, l, i) in ranked.iter().take(n_prune) {
        mask.layers[l].as_mut().expect("prunable layer")[i] = false;
        match &mut pruned.layers_mut()[l] {
            Layer::Conv1d(c) => c.weights[i] = 0.0,
            Layer::Dense(d) => d.weights[i] = 0.0,
            _ => unreachable!(),
        }
    }
    Ok((pruned, mask))
}

/// Retrains the surviving weights for `rewind_epochs` at the constant
/// final-epoch learning rate of the original schedule. Masked positions get
/// zero gradient and momentum and stay exactly zero.
pub fn rewind_retrain(
    pruned: &FloatModel,
    mask: &WeightMask,
    train_set: &LabeledDataset,
    val_set: &LabeledDataset,
    cfg: &TrainConfig,
    rewind_epochs: usize,
) -> Result<(FloatModel, TrainHistory)> {
    let opts = TrainOptions {
        constant_lr: Some(cfg.final_epoch_lr()),
        mask: Some(mask),
        epochs: Some(rewind_epochs),
    };
    train_with_options(pruned, train_set, val_set, cfg, &opts)
}

/// Folds each eval-mode batch norm into the preceding conv:
/// `w' = w * gamma / sqrt(var + eps)`, `b' = (b - mean) * gamma / sqrt(var
/// + eps) + beta`. Errors if a batch norm has no preceding conv.
pub fn fold_batchnorm(model: &FloatModel) -> Result<FloatModel> {
    let mut layers: Vec<Layer> = Vec::with_capacity(model.layers().len());
    for (l, layer) in model.layers().iter().enumerate() {
        match layer {
            Layer::BatchNorm1d(bn) => {
                let prev = layers.last_mut().ok_or_else(|| Error::Shape {
                    layer: l,
                    message: "batch norm without preceding conv".into(),
                })?;
                let Layer::Conv1d(conv) = prev else {
                    return Err(Error::Shape {
                        layer: l,
                        message: "batch norm without preceding conv".into(),
                    });
                };
                let per_ic_k = conv.in_ch * conv.kernel;
                for oc in 0..conv.out_ch {
                    let f = (bn.gamma[oc] as f64)
                        / ((bn.running_var[oc] as f64 + bn.epsilon as f64).sqrt());
                    for i in 0..per_ic_k {
                        let w = &mut conv.weights[oc * per_ic_k + i];
                        *w = (*w as f64 * f) as f32;
                    }
                    conv.bias[oc] = ((conv.bias[oc] as f64 - bn.running_mean[oc] as f64) * f
                        + bn.beta[oc] as f64) as f32;
                }
            }
            other => layers.push(other.clone()),
        }
    }
    FloatModel::new(model.input_len, model.input_ch, layers)
}

/// Widened minimum width of a calibrated activation range.
pub const MIN_RANGE_WIDTH: f32 = 1e-6;
/// Default representative-set size.
pub const CALIBRATION_SIZE: usize = 100;

/// Per-tensor activation extrema observed on the calibration set. Index 0
/// is the model input; index `i + 1` the output of layer `i`. Every range
/// is widened to include 0 and to span at least `MIN_RANGE_WIDTH`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActivationRanges {
    pub tensors: Vec<(f32, f32)>,
}

/// Samples `size` windows uniformly without replacement from train ∪ val.
/// If fewer are available, all of them are used and a warning is returned.
pub fn select_calibration(
    train_set: &LabeledDataset,
    val_set: &LabeledDataset,
    size: usize,
    seed: u64,
) -> (Vec<TimeWindow>, Vec<String>) {
    let mut pool: Vec<TimeWindow> = train_set
        .windows()
        .iter()
        .chain(val_set.windows())
        .cloned()
        .collect();
    let mut warnings = Vec::new();
    if pool.len() < size {
        warnings.push(format!(
            "calibration set has only {} windows (requested {size})",
            pool.len()
        ));
    }
    let mut rng = rng::seeded(seed);
    pool.shuffle(&mut rng);
    pool.truncate(size);
    (pool, warnings)
}

/// Runs an eval-mode forward on every calibration window and records the
/// running min/max of the input and of every layer output.
pub fn calibrate(model: &FloatModel, calib: &[TimeWindow]) -> Result<ActivationRanges> {
    if calib.is_empty() {
        return Err(Error::EmptyDataset("calibration set is empty".into()));
    }
    let n_tensors = model.layers().len() + 1;
    let mut ranges = vec![(f32::INFINITY, f32::NEG_INFINITY); n_tensors];
    for w in calib {
        let trace = model.eval_trace(w)?;
        for (r, tensor) in ranges.iter_mut().zip(&trace) {
            for &v in tensor {
                r.0 = r.0.min(v);
                r.1 = r.1.max(v);
            }
        }
    }
    let tensors = ranges
        .into_iter()
        .map(|(lo, hi)| {
            // Widen to include zero so it is exactly representable, then
            // enforce the minimum width.
            let lo = lo.min(0.0);
            let mut hi = hi.max(0.0);
            if hi - lo < MIN_RANGE_WIDTH {
                hi = lo + MIN_RANGE_WIDTH;
            }
            (lo, hi)
        })
        .collect();
    Ok(ActivationRanges { tensors })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuantScheme {
    Symmetric,
    Affine,
}

/// Per-tensor quantization parameters. Symmetric scheme implies a zero
/// point of 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantParams {
    pub scale: f32,
    pub zero_point: i8,
    pub scheme: QuantScheme,
}

impl QuantParams {
    /// Symmetric weight parameters: `scale = max|w| / 127`. An all-zero
    /// tensor gets a unit scale (every value quantizes to 0 either way).
    pub fn symmetric_for(values: &[f32]) -> QuantParams {
        let max_abs = values.iter().fold(0.0f32, |m, v| m.max(v.abs()));
        QuantParams {
            scale: if max_abs == 0.0 { 1.0 } else { max_abs / 127.0 },
            zero_point: 0,
            scheme: QuantScheme::Symmetric,
        }
    }

    /// Affine activation parameters: `scale = (max - min) / 255`,
    /// `zeroPoint = round(-128 - min/scale)` clamped to [-128, 127].
    pub fn affine_for(range: (f32, f32)) -> Result<QuantParams> {
        let (lo, hi) = range;
        let scale = (hi - lo) / 255.0;
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Config(format!(
                "degenerate activation range [{lo}, {hi}]"
            )));
        }
        let zp = (-128.0 - (lo as f64) / (scale as f64)).round();
        QuantParams {
            scale,
            zero_point: zp.clamp(-128.0, 127.0) as i8,
            scheme: QuantScheme::Affine,
        }
        .validated()
    }

    fn validated(self) -> Result<QuantParams> {
        if !(self.scale > 0.0) {
            return Err(Error::Config("quantization scale must be positive".into()));
        }
        if self.scheme == QuantScheme::Symmetric && self.zero_point != 0 {
            return Err(Error::Config("symmetric scheme requires zero point 0".into()));
        }
        Ok(self)
    }

    /// `q = clamp(round(x/scale) + zeroPoint)`; symmetric weights clamp to
    /// [-127, 127] so that negation stays in range.
    pub fn quantize_value(&self, x: f32) -> i8 {
        let q = (x as f64 / self.scale as f64).round() + self.zero_point as f64;
        let lo = if self.scheme == QuantScheme::Symmetric { -127.0 } else { -128.0 };
        q.clamp(lo, 127.0) as i8
    }

    pub fn dequantize_value(&self, q: i8) -> f32 {
        self.scale * (q as i32 - self.zero_point as i32) as f32
    }
}

/// Quantized tensor: 8-bit values plus their parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTensor {
    pub data: Vec<i8>,
    pub params: QuantParams,
}

impl QTensor {
    fn from_weights(values: &[f32]) -> QTensor {
        let params = QuantParams::symmetric_for(values);
        QTensor {
            data: values.iter().map(|&v| params.quantize_value(v)).collect(),
            params,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QConv1d {
    pub out_ch: usize,
    pub in_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub weights: QTensor,
    /// 32-bit integer biases with scale = inputScale * weightScale.
    pub bias: Vec<i32>,
    pub out_params: QuantParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QDense {
    pub out_dim: usize,
    pub in_dim: usize,
    pub weights: QTensor,
    pub bias: Vec<i32>,
    pub out_params: QuantParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum QLayer {
    Conv1d(QConv1d),
    /// Integer max with the zero point; parameters pass through unchanged.
    Relu,
    GlobalAvgPool { out_params: QuantParams },
    Dense(QDense),
}

/// Fully integer model: batch norm folded away, 8-bit weights and
/// activations, 32-bit biases. Only the scales remain floating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedModel {
    pub input_len: usize,
    pub input_ch: usize,
    pub input_params: QuantParams,
    pub layers: Vec<QLayer>,
}

fn quantize_biases(bias: &[f32], in_scale: f32, w_scale: f32) -> Vec<i32> {
    let s = in_scale as f64 * w_scale as f64;
    bias.iter().map(|&b| (b as f64 / s).round() as i32).collect()
}

/// Quantizes a folded model using calibrated activation ranges: symmetric
/// per-tensor weights, affine per-tensor activations, 32-bit biases at the
/// product scale. ReLU keeps its input's parameters (it runs as an integer
/// max), so the next layer consumes the preceding conv's output parameters.
pub fn quantize(model: &FloatModel, ranges: &ActivationRanges) -> Result<QuantizedModel> {
    if ranges.tensors.len() != model.layers().len() + 1 {
        return Err(Error::Config(format!(
            "expected {} activation ranges, got {}",
            model.layers().len() + 1,
            ranges.tensors.len()
        )));
    }
    let input_params = QuantParams::affine_for(ranges.tensors[0])?;
    let mut current = input_params;
    let mut layers = Vec::with_capacity(model.layers().len());
    for (l, layer) in model.layers().iter().enumerate() {
        let out_range = ranges.tensors[l + 1];
        match layer {
            Layer::Conv1d(c) => {
                let weights = QTensor::from_weights(&c.weights);
                let out_params = QuantParams::affine_for(out_range)?;
                let bias = quantize_biases(&c.bias, current.scale, weights.params.scale);
                layers.push(QLayer::Conv1d(QConv1d {
                    out_ch: c.out_ch,
                    in_ch: c.in_ch,
                    kernel: c.kernel,
                    stride: c.stride,
                    padding: c.padding,
                    weights,
                    bias,
                    out_params,
                }));
                current = out_params;
            }
            Layer::Relu => layers.push(QLayer::Relu),
            Layer::GlobalAvgPool => {
                let out_params = QuantParams::affine_for(out_range)?;
                layers.push(QLayer::GlobalAvgPool { out_params });
                current = out_params;
            }
            Layer::Dense(d) => {
                let weights = QTensor::from_weights(&d.weights);
                let out_params = QuantParams::affine_for(out_range)?;
                let bias = quantize_biases(&d.bias, current.scale, weights.params.scale);
                layers.push(QLayer::Dense(QDense {
                    out_dim: d.out_dim,
                    in_dim: d.in_dim,
                    weights,
                    bias,
                    out_params,
                }));
                current = out_params;
            }
            Layer::BatchNorm1d(_) => {
                return Err(Error::Shape {
                    layer: l,
                    message: "fold batch norm before quantizing".into(),
                });
            }
        }
    }
    Ok(QuantizedModel {
        input_len: model.input_len,
        input_ch: model.input_ch,
        input_params,
        layers,
    })
}
