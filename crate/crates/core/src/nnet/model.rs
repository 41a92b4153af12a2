//! Layer definitions, shape checking, batch forward pass with caching, and
//! exact analytic backpropagation.

use crate::dataio::{TimeWindow, AXES};
use crate::error::{Error, Result};
use crate::rng;
use rand::Rng;

/// Feature map for one sample: `channels x length`, stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Feat {
    pub ch: usize,
    pub len: usize,
    pub data: Vec<f32>,
}

impl Feat {
    pub fn zeros(ch: usize, len: usize) -> Feat {
        Feat {
            ch,
            len,
            data: vec![0.0; ch * len],
        }
    }

    #[inline]
    pub fn get(&self, c: usize, t: usize) -> f32 {
        self.data[c * self.len + t]
    }

    #[inline]
    pub fn set(&mut self, c: usize, t: usize, v: f32) {
        self.data[c * self.len + t] = v;
    }

    pub fn from_window(w: &TimeWindow) -> Feat {
        let mut f = Feat::zeros(AXES, w.v_l());
        for t in 0..w.v_l() {
            for c in 0..AXES {
                f.set(c, t, w.value(t, c));
            }
        }
        f
    }
}

#[derive(Debug, Clone)]
pub struct Conv1d {
    pub out_ch: usize,
    pub in_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    /// `[out_ch][in_ch][kernel]`, flattened.
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Conv1d {
    pub fn new(out_ch: usize, in_ch: usize, kernel: usize, stride: usize, padding: usize) -> Conv1d {
        Conv1d {
            out_ch,
            in_ch,
            kernel,
            stride,
            padding,
            weights: vec![0.0; out_ch * in_ch * kernel],
            bias: vec![0.0; out_ch],
        }
    }

    #[inline]
    pub fn w(&self, oc: usize, ic: usize, k: usize) -> f32 {
        self.weights[(oc * self.in_ch + ic) * self.kernel + k]
    }

    pub fn out_len(&self, in_len: usize) -> Option<usize> {
        let padded = in_len + 2 * self.padding;
        if padded < self.kernel {
            return None;
        }
        Some((padded - self.kernel) / self.stride + 1)
    }
}

#[derive(Debug, Clone)]
pub struct BatchNorm1d {
    pub channels: usize,
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub running_mean: Vec<f32>,
    pub running_var: Vec<f32>,
    pub epsilon: f32,
    /// Update rate for the running statistics in train mode.
    pub momentum: f32,
}

impl BatchNorm1d {
    pub fn identity(channels: usize) -> BatchNorm1d {
        BatchNorm1d {
            channels,
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            epsilon: 1e-5,
            momentum: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dense {
    pub out_dim: usize,
    pub in_dim: usize,
    /// `[out_dim][in_dim]`, flattened.
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Dense {
    pub fn new(out_dim: usize, in_dim: usize) -> Dense {
        Dense {
            out_dim,
            in_dim,
            weights: vec![0.0; out_dim * in_dim],
            bias: vec![0.0; out_dim],
        }
    }
}

#[derive(Debug, Clone)]
pub enum Layer {
    Conv1d(Conv1d),
    BatchNorm1d(BatchNorm1d),
    Relu,
    GlobalAvgPool,
    Dense(Dense),
}

impl Layer {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Conv1d(_) => "Conv1d",
            Layer::BatchNorm1d(_) => "BatchNorm1d",
            Layer::Relu => "Relu",
            Layer::GlobalAvgPool => "GlobalAvgPool",
            Layer::Dense(_) => "Dense",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// The trainable float network. Input shape is `input_len` time steps by
/// `input_ch` channels.
#[derive(Debug, Clone)]
pub struct FloatModel {
    pub input_len: usize,
    pub input_ch: usize,
    layers: Vec<Layer>,
}

impl FloatModel {
    /// Builds a model, checking that adjacent layer shapes compose and that
    /// batch-norm running variances are positive.
    pub fn new(input_len: usize, input_ch: usize, layers: Vec<Layer>) -> Result<FloatModel> {
        let model = FloatModel {
            input_len,
            input_ch,
            layers,
        };
        model.output_dim()?;
        for (i, layer) in model.layers.iter().enumerate() {
            if let Layer::BatchNorm1d(bn) = layer {
                if bn.running_var.iter().any(|&v| v <= 0.0) {
                    return Err(Error::Shape {
                        layer: i,
                        message: "running_var entries must be > 0".into(),
                    });
                }
            }
        }
        Ok(model)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Propagates shapes through the stack; the model output must be a
    /// vector (length-1 feature map or dense output).
    pub fn output_dim(&self) -> Result<usize> {
        let (ch, len) = self.output_shape()?;
        Ok(ch * len)
    }

    fn output_shape(&self) -> Result<(usize, usize)> {
        let mut ch = self.input_ch;
        let mut len = self.input_len;
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Conv1d(c) => {
                    if c.in_ch != ch {
                        return Err(Error::Shape {
                            layer: i,
                            message: format!("conv expects {} channels, got {}", c.in_ch, ch),
                        });
                    }
                    len = c.out_len(len).ok_or_else(|| Error::Shape {
                        layer: i,
                        message: format!("kernel {} larger than padded input {}", c.kernel, len),
                    })?;
                    ch = c.out_ch;
                }
                Layer::BatchNorm1d(bn) => {
                    if bn.channels != ch {
                        return Err(Error::Shape {
                            layer: i,
                            message: format!("batchnorm expects {} channels, got {}", bn.channels, ch),
                        });
                    }
                }
                Layer::Relu => {}
                Layer::GlobalAvgPool => {
                    len = 1;
                }
                Layer::Dense(d) => {
                    if d.in_dim != ch * len {
                        return Err(Error::Shape {
                            layer: i,
                            message: format!("dense expects {} inputs, got {}", d.in_dim, ch * len),
                        });
                    }
                    ch = d.out_dim;
                    len = 1;
                }
            }
        }
        Ok((ch, len))
    }

    /// All trainable parameters flattened in layer order (conv: weights then
    /// bias; batch norm: gamma then beta; dense: weights then bias). Running
    /// statistics are not parameters and are excluded.
    pub fn params_flat(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for layer in &self.layers {
            match layer {
                Layer::Conv1d(c) => {
                    out.extend_from_slice(&c.weights);
                    out.extend_from_slice(&c.bias);
                }
                Layer::BatchNorm1d(bn) => {
                    out.extend_from_slice(&bn.gamma);
                    out.extend_from_slice(&bn.beta);
                }
                Layer::Dense(d) => {
                    out.extend_from_slice(&d.weights);
                    out.extend_from_slice(&d.bias);
                }
                _ => {}
            }
        }
        out
    }

    /// Inverse of [`FloatModel::params_flat`].
    pub fn set_params_flat(&mut self, params: &[f32]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::Shape {
                layer: 0,
                message: format!(
                    "expected {} parameters, got {}",
                    self.parameter_count(),
                    params.len()
                ),
            });
        }
        let mut idx = 0;
        let mut take = |dst: &mut [f32]| {
            dst.copy_from_slice(&params[idx..idx + dst.len()]);
            idx += dst.len();
        };
        for layer in &mut self.layers {
            match layer {
                Layer::Conv1d(c) => {
                    take(&mut c.weights);
                    take(&mut c.bias);
                }
                Layer::BatchNorm1d(bn) => {
                    take(&mut bn.gamma);
                    take(&mut bn.beta);
                }
                Layer::Dense(d) => {
                    take(&mut d.weights);
                    take(&mut d.bias);
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Total number of parameters (weights, biases, batch-norm affine).
    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Conv1d(c) => c.weights.len() + c.bias.len(),
                Layer::BatchNorm1d(bn) => bn.gamma.len() + bn.beta.len(),
                Layer::Dense(d) => d.weights.len() + d.bias.len(),
                _ => 0,
            })
            .sum()
    }

    /// Forward pass for one window. In train mode batch statistics (over this
    /// single window) are used and running statistics updated; eval mode uses
    /// running statistics and is deterministic.
    pub fn forward(&mut self, window: &TimeWindow, mode: Mode) -> Result<Vec<f32>> {
        let input = Feat::from_window(window);
        let (outputs, _) = forward_batch(self, std::slice::from_ref(&input), mode)?;
        Ok(outputs.into_iter().next().expect("one output").data)
    }

    /// Eval-mode forward without mutating running statistics.
    pub fn forward_eval(&self, window: &TimeWindow) -> Result<Vec<f32>> {
        let input = Feat::from_window(window);
        let outputs = forward_eval_batch(self, std::slice::from_ref(&input))?;
        Ok(outputs.into_iter().next().expect("one output").data)
    }

    /// Eval-mode forward returning every intermediate activation tensor:
    /// index 0 is the input, index `i+1` the output of layer `i`. Used by
    /// quantization calibration.
    pub fn eval_trace(&self, window: &TimeWindow) -> Result<Vec<Vec<f32>>> {
        let input = Feat::from_window(window);
        check_input_shape(self, std::slice::from_ref(&input))?;
        let mut trace = vec![input.data.clone()];
        let mut current = input;
        for layer in self.layers.iter() {
            current = match layer {
                Layer::Conv1d(c) => conv_forward(c, &current),
                Layer::Dense(d) => dense_forward(d, &current),
                Layer::Relu => Feat {
                    ch: current.ch,
                    len: current.len,
                    data: current.data.iter().map(|&v| v.max(0.0)).collect(),
                },
                Layer::GlobalAvgPool => {
                    let mut y = Feat::zeros(current.ch, 1);
                    for c in 0..current.ch {
                        let sum: f32 = (0..current.len).map(|t| current.get(c, t)).sum();
                        y.data[c] = sum / current.len as f32;
                    }
                    y
                }
                Layer::BatchNorm1d(bn) => bn_eval_forward(bn, &current),
            };
            trace.push(current.data.clone());
        }
        Ok(trace)
    }
}

/// Per-layer caches captured during a training-mode forward pass.
pub(crate) struct BatchCache {
    /// `inputs[l]` is the batch input to layer `l`; `inputs[L]` the output.
    pub inputs: Vec<Vec<Feat>>,
    pub bn: Vec<Option<BnCache>>,
}

pub(crate) struct BnCache {
    pub inv_std: Vec<f32>,
    /// Normalized activations, per sample.
    pub xhat: Vec<Feat>,
}

fn check_input_shape(model: &FloatModel, inputs: &[Feat]) -> Result<()> {
    for f in inputs {
        if f.ch != model.input_ch || f.len != model.input_len {
            return Err(Error::Shape {
                layer: 0,
                message: format!(
                    "input is {}x{}, model expects {}x{}",
                    f.len, f.ch, model.input_len, model.input_ch
                ),
            });
        }
    }
    Ok(())
}

fn conv_forward(c: &Conv1d, x: &Feat) -> Feat {
    let out_len = c.out_len(x.len).expect("shape checked");
    let mut y = Feat::zeros(c.out_ch, out_len);
    for oc in 0..c.out_ch {
        for j in 0..out_len {
            let mut acc = c.bias[oc];
            let start = (j * c.stride) as isize - c.padding as isize;
            for ic in 0..c.in_ch {
                for k in 0..c.kernel {
                    let src = start + k as isize;
                    if src >= 0 && (src as usize) < x.len {
                        acc += c.w(oc, ic, k) * x.get(ic, src as usize);
                    }
                }
            }
            y.set(oc, j, acc);
        }
    }
    y
}

fn dense_forward(d: &Dense, x: &Feat) -> Feat {
    let mut y = Feat::zeros(d.out_dim, 1);
    for o in 0..d.out_dim {
        let mut acc = d.bias[o];
        for i in 0..d.in_dim {
            acc += d.weights[o * d.in_dim + i] * x.data[i];
        }
        y.data[o] = acc;
    }
    y
}

fn bn_eval_forward(bn: &BatchNorm1d, x: &Feat) -> Feat {
    let mut y = Feat::zeros(x.ch, x.len);
    for c in 0..x.ch {
        let inv_std = 1.0 / (bn.running_var[c] + bn.epsilon).sqrt();
        for t in 0..x.len {
            y.set(c, t, (x.get(c, t) - bn.running_mean[c]) * inv_std * bn.gamma[c] + bn.beta[c]);
        }
    }
    y
}

/// Training-mode forward over a batch, capturing caches for backprop.
/// Updates batch-norm running statistics in place.
pub(crate) fn forward_batch(
    model: &mut FloatModel,
    inputs: &[Feat],
    mode: Mode,
) -> Result<(Vec<Feat>, BatchCache)> {
    check_input_shape(model, inputs)?;
    let mut cache = BatchCache {
        inputs: Vec::with_capacity(model.layers.len() + 1),
        bn: vec![],
    };
    let mut current: Vec<Feat> = inputs.to_vec();
    for layer in model.layers.iter_mut() {
        cache.inputs.push(current.clone());
        let mut bn_cache = None;
        current = match layer {
            Layer::Conv1d(c) => current.iter().map(|x| conv_forward(c, x)).collect(),
            Layer::Dense(d) => current.iter().map(|x| dense_forward(d, x)).collect(),
            Layer::Relu => current
                .iter()
                .map(|x| Feat {
                    ch: x.ch,
                    len: x.len,
                    data: x.data.iter().map(|&v| v.max(0.0)).collect(),
                })
                .collect(),
            Layer::GlobalAvgPool => current
                .iter()
                .map(|x| {
                    let mut y = Feat::zeros(x.ch, 1);
                    for c in 0..x.ch {
                        let sum: f32 = (0..x.len).map(|t| x.get(c, t)).sum();
                        y.data[c] = sum / x.len as f32;
                    }
                    y
                })
                .collect(),
            Layer::BatchNorm1d(bn) => {
                if mode == Mode::Eval {
                    current.iter().map(|x| bn_eval_forward(bn, x)).collect()
                } else {
                    let ch = bn.channels;
                    let len = current[0].len;
                    let m = (current.len() * len) as f64;
                    let mut mean = vec![0.0f64; ch];
                    let mut var = vec![0.0f64; ch];
                    for x in &current {
                        for c in 0..ch {
                            for t in 0..len {
                                mean[c] += x.get(c, t) as f64;
                            }
                        }
                    }
                    for v in mean.iter_mut() {
                        *v /= m;
                    }
                    for x in &current {
                        for c in 0..ch {
                            for t in 0..len {
                                let d = x.get(c, t) as f64 - mean[c];
                                var[c] += d * d;
                            }
                        }
                    }
                    for v in var.iter_mut() {
                        *v /= m;
                    }
                    let inv_std: Vec<f32> = (0..ch)
                        .map(|c| (1.0 / (var[c] + bn.epsilon as f64).sqrt()) as f32)
                        .collect();
                    // Running statistics: biased batch variance, update rate
                    // `momentum`.
                    for c in 0..ch {
                        bn.running_mean[c] =
                            (1.0 - bn.momentum) * bn.running_mean[c] + bn.momentum * mean[c] as f32;
                        bn.running_var[c] =
                            (1.0 - bn.momentum) * bn.running_var[c] + bn.momentum * var[c] as f32;
                    }
                    let mut xhat_batch = Vec::with_capacity(current.len());
                    let out: Vec<Feat> = current
                        .iter()
                        .map(|x| {
                            let mut xhat = Feat::zeros(ch, len);
                            let mut y = Feat::zeros(ch, len);
                            for c in 0..ch {
                                for t in 0..len {
                                    let h = (x.get(c, t) - mean[c] as f32) * inv_std[c];
                                    xhat.set(c, t, h);
                                    y.set(c, t, h * bn.gamma[c] + bn.beta[c]);
                                }
                            }
                            xhat_batch.push(xhat);
                            y
                        })
                        .collect();
                    bn_cache = Some(BnCache {
                        inv_std,
                        xhat: xhat_batch,
                    });
                    out
                }
            }
        };
        cache.bn.push(bn_cache);
    }
    cache.inputs.push(current.clone());
    Ok((current, cache))
}

/// Eval-mode forward over a batch without mutating the model.
pub(crate) fn forward_eval_batch(model: &FloatModel, inputs: &[Feat]) -> Result<Vec<Feat>> {
    check_input_shape(model, inputs)?;
    let mut current: Vec<Feat> = inputs.to_vec();
    for layer in model.layers.iter() {
        current = match layer {
            Layer::Conv1d(c) => current.iter().map(|x| conv_forward(c, x)).collect(),
            Layer::Dense(d) => current.iter().map(|x| dense_forward(d, x)).collect(),
            Layer::Relu => current
                .iter()
                .map(|x| Feat {
                    ch: x.ch,
                    len: x.len,
                    data: x.data.iter().map(|&v| v.max(0.0)).collect(),
                })
                .collect(),
            Layer::GlobalAvgPool => current
                .iter()
                .map(|x| {
                    let mut y = Feat::zeros(x.ch, 1);
                    for c in 0..x.ch {
                        let sum: f32 = (0..x.len).map(|t| x.get(c, t)).sum();
                        y.data[c] = sum / x.len as f32;
                    }
                    y
                })
                .collect(),
            Layer::BatchNorm1d(bn) => current.iter().map(|x| bn_eval_forward(bn, x)).collect(),
        };
    }
    Ok(current)
}

/// Per-layer parameter gradients, same shapes as the parameters.
#[derive(Debug, Clone)]
pub enum LayerGrad {
    Conv { dw: Vec<f32>, db: Vec<f32> },
    Bn { dgamma: Vec<f32>, dbeta: Vec<f32> },
    Dense { dw: Vec<f32>, db: Vec<f32> },
    None,
}

#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn zeros_like(model: &FloatModel) -> Gradients {
        Gradients {
            layers: model
                .layers
                .iter()
                .map(|l| match l {
                    Layer::Conv1d(c) => LayerGrad::Conv {
                        dw: vec![0.0; c.weights.len()],
                        db: vec![0.0; c.bias.len()],
                    },
                    Layer::BatchNorm1d(bn) => LayerGrad::Bn {
                        dgamma: vec![0.0; bn.gamma.len()],
                        dbeta: vec![0.0; bn.beta.len()],
                    },
                    Layer::Dense(d) => LayerGrad::Dense {
                        dw: vec![0.0; d.weights.len()],
                        db: vec![0.0; d.bias.len()],
                    },
                    _ => LayerGrad::None,
                })
                .collect(),
        }
    }

    /// Gradients flattened in the same order as [`FloatModel::params_flat`].
    pub fn flat(&self) -> Vec<f32> {
        let mut out = Vec::new();
        for g in &self.layers {
            match g {
                LayerGrad::Conv { dw, db } | LayerGrad::Dense { dw, db } => {
                    out.extend_from_slice(dw);
                    out.extend_from_slice(db);
                }
                LayerGrad::Bn { dgamma, dbeta } => {
                    out.extend_from_slice(dgamma);
                    out.extend_from_slice(dbeta);
                }
                LayerGrad::None => {}
            }
        }
        out
    }

    pub fn scale(&mut self, s: f32) {
        for g in &mut self.layers {
            match g {
                LayerGrad::Conv { dw, db } | LayerGrad::Dense { dw, db } => {
                    dw.iter_mut().for_each(|v| *v *= s);
                    db.iter_mut().for_each(|v| *v *= s);
                }
                LayerGrad::Bn { dgamma, dbeta } => {
                    dgamma.iter_mut().for_each(|v| *v *= s);
                    dbeta.iter_mut().for_each(|v| *v *= s);
                }
                LayerGrad::None => {}
            }
        }
    }
}

/// Backpropagates `dlogits` (gradient of the batch loss w.r.t. each sample's
/// output vector) through the cached forward pass, producing parameter
/// gradients.
pub(crate) fn backward_batch(
    model: &FloatModel,
    cache: &BatchCache,
    dlogits: &[Feat],
) -> Gradients {
    let mut grads = Gradients::zeros_like(model);
    let mut dy: Vec<Feat> = dlogits.to_vec();

    for (l, layer) in model.layers.iter().enumerate().rev() {
        let xs = &cache.inputs[l];
        match layer {
            Layer::Dense(d) => {
                let mut dw = vec![0.0f32; d.weights.len()];
                let mut db = vec![0.0f32; d.bias.len()];
                let mut dx_batch = Vec::with_capacity(xs.len());
                for (x, g) in xs.iter().zip(&dy) {
                    let mut dx = Feat::zeros(x.ch, x.len);
                    for o in 0..d.out_dim {
                        let go = g.data[o];
                        db[o] += go;
                        for i in 0..d.in_dim {
                            dw[o * d.in_dim + i] += go * x.data[i];
                            dx.data[i] += go * d.weights[o * d.in_dim + i];
                        }
                    }
                    dx_batch.push(dx);
                }
                grads.layers[l] = LayerGrad::Dense { dw, db };
                dy = dx_batch;
            }
            Layer::GlobalAvgPool => {
                dy = xs
                    .iter()
                    .zip(&dy)
                    .map(|(x, g)| {
                        let mut dx = Feat::zeros(x.ch, x.len);
                        let inv = 1.0 / x.len as f32;
                        for c in 0..x.ch {
                            for t in 0..x.len {
                                dx.set(c, t, g.data[c] * inv);
                            }
                        }
                        dx
                    })
                    .collect();
            }
            Layer::Relu => {
                dy = xs
                    .iter()
                    .zip(&dy)
                    .map(|(x, g)| Feat {
                        ch: x.ch,
                        len: x.len,
                        data: x
                            .data
                            .iter()
                            .zip(&g.data)
                            .map(|(&xv, &gv)| if xv > 0.0 { gv } else { 0.0 })
                            .collect(),
                    })
                    .collect();
            }
            Layer::BatchNorm1d(bn) => {
                let bn_cache = cache.bn[l].as_ref().expect("bn cache in train mode");
                let ch = bn.channels;
                let len = xs[0].len;
                let m = (xs.len() * len) as f64;
                let mut dgamma = vec![0.0f64; ch];
                let mut dbeta = vec![0.0f64; ch];
                for (xhat, g) in bn_cache.xhat.iter().zip(&dy) {
                    for c in 0..ch {
                        for t in 0..len {
                            dgamma[c] += (g.get(c, t) * xhat.get(c, t)) as f64;
                            dbeta[c] += g.get(c, t) as f64;
                        }
                    }
                }
                // dx = gamma*inv_std/m * (m*dy - sum(dy) - xhat*sum(dy*xhat))
                let mut dx_batch = Vec::with_capacity(xs.len());
                for (xhat, g) in bn_cache.xhat.iter().zip(&dy) {
                    let mut dx = Feat::zeros(ch, len);
                    for c in 0..ch {
                        let coeff = bn.gamma[c] as f64 * bn_cache.inv_std[c] as f64 / m;
                        for t in 0..len {
                            let v = coeff
                                * (m * g.get(c, t) as f64
                                    - dbeta[c]
                                    - xhat.get(c, t) as f64 * dgamma[c]);
                            dx.set(c, t, v as f32);
                        }
                    }
                    dx_batch.push(dx);
                }
                grads.layers[l] = LayerGrad::Bn {
                    dgamma: dgamma.iter().map(|&v| v as f32).collect(),
                    dbeta: dbeta.iter().map(|&v| v as f32).collect(),
                };
                dy = dx_batch;
            }
            Layer::Conv1d(c) => {
                let mut dw = vec![0.0f64; c.weights.len()];
                let mut db = vec![0.0f64; c.bias.len()];
                let mut dx_batch = Vec::with_capacity(xs.len());
                for (x, g) in xs.iter().zip(&dy) {
                    let out_len = g.len;
                    let mut dx = Feat::zeros(x.ch, x.len);
                    for oc in 0..c.out_ch {
                        for j in 0..out_len {
                            let go = g.get(oc, j);
                            if go == 0.0 {
                                continue;
                            }
                            db[oc] += go as f64;
                            let start = (j * c.stride) as isize - c.padding as isize;
                            for ic in 0..c.in_ch {
                                for k in 0..c.kernel {
                                    let src = start + k as isize;
                                    if src >= 0 && (src as usize) < x.len {
                                        let src = src as usize;
                                        dw[(oc * c.in_ch + ic) * c.kernel + k] +=
                                            (go * x.get(ic, src)) as f64;
                                        dx.data[ic * x.len + src] += go * c.w(oc, ic, k);
                                    }
                                }
                            }
                        }
                    }
                    dx_batch.push(dx);
                }
                grads.layers[l] = LayerGrad::Conv {
                    dw: dw.iter().map(|&v| v as f32).collect(),
                    db: db.iter().map(|&v| v as f32).collect(),
                };
                dy = dx_batch;
            }
        }
    }
    grads
}

/// Boolean keep-masks for the prunable (conv and dense) weight tensors,
/// indexed by layer. `true` = kept, `false` = forced to zero.
#[derive(Debug, Clone)]
pub struct WeightMask {
    pub layers: Vec<Option<Vec<bool>>>,
}

impl WeightMask {
    pub fn all_kept(model: &FloatModel) -> WeightMask {
        WeightMask {
            layers: model
                .layers
                .iter()
                .map(|l| match l {
                    Layer::Conv1d(c) => Some(vec![true; c.weights.len()]),
                    Layer::Dense(d) => Some(vec![true; d.weights.len()]),
                    _ => None,
                })
                .collect(),
        }
    }

    pub fn matches(&self, model: &FloatModel) -> bool {
        if self.layers.len() != model.layers.len() {
            return false;
        }
        self.layers.iter().zip(model.layers.iter()).all(|(m, l)| {
            match (m, l) {
                (Some(mask), Layer::Conv1d(c)) => mask.len() == c.weights.len(),
                (Some(mask), Layer::Dense(d)) => mask.len() == d.weights.len(),
                (None, Layer::Conv1d(_)) | (None, Layer::Dense(_)) => false,
                (None, _) => true,
                (Some(_), _) => false,
            }
        })
    }

    pub fn masked_count(&self) -> usize {
        self.layers
            .iter()
            .flatten()
            .map(|m| m.iter().filter(|&&kept| !kept).count())
            .sum()
    }
}

/// The default network: three Conv-BN-ReLU blocks (kernel 5, stride 2) with
/// channels 3 -> 8 -> 16 -> 32, global average pooling, and a dense head.
pub fn default_architecture(v_l: usize, num_classes: usize, seed: u64) -> Result<FloatModel> {
    let mut rng = rng::seeded(seed);
    let widths = [3usize, 8, 16, 32];
    let mut layers = Vec::new();
    for i in 0..3 {
        let mut conv = Conv1d::new(widths[i + 1], widths[i], 5, 2, 2);
        kaiming_uniform(&mut conv.weights, widths[i] * 5, &mut rng);
        layers.push(Layer::Conv1d(conv));
        layers.push(Layer::BatchNorm1d(BatchNorm1d::identity(widths[i + 1])));
        layers.push(Layer::Relu);
    }
    layers.push(Layer::GlobalAvgPool);
    let mut dense = Dense::new(num_classes, widths[3]);
    kaiming_uniform(&mut dense.weights, widths[3], &mut rng);
    layers.push(Layer::Dense(dense));
    FloatModel::new(v_l, 3, layers)
}

/// Kaiming-uniform fan-in initialization with ReLU gain.
pub fn kaiming_uniform(weights: &mut [f32], fan_in: usize, rng: &mut rand_chacha::ChaCha8Rng) {
    let bound = (6.0 / fan_in as f64).sqrt();
    for w in weights.iter_mut() {
        *w = rng.random_range(-bound..bound) as f32;
    }
}
