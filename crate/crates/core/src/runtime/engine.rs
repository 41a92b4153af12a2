//! Integer-only inference over a quantized model. All arithmetic between
//! input quantization and logit dequantization is on integers: 8-bit
//! operands, 32-bit accumulators, and fixed-point rescaling. The only
//! floating-point work happens once at load time, when the scale ratios are
//! converted to fixed-point multipliers.

use crate::compress::{QLayer, QuantParams, QuantizedModel};
use crate::dataio::{TimeWindow, AXES};
use crate::error::{Error, Result};
use crate::nnet::{softmax, SoftDecision};
use std::time::Instant;

/// A positive real factor expressed as `significand / 2^31 * 2^exponent`
/// with a 31-bit significand, applied by multiply-and-shift with
/// round-half-away-from-zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedPointMultiplier {
    pub significand: i32,
    /// Total right shift applied after the significand multiply.
    pub shift: u32,
}

impl FixedPointMultiplier {
    pub fn from_ratio(ratio: f64) -> Result<FixedPointMultiplier> {
        if !(ratio > 0.0) || !ratio.is_finite() {
            return Err(Error::Invariant(format!(
                "fixed-point multiplier needs a positive finite ratio, got {ratio}"
            )));
        }
        // ratio = m * 2^exp with m in [0.5, 1).
        let (mut m, mut exp) = (ratio, 0i32);
        while m >= 1.0 {
            m /= 2.0;
            exp += 1;
        }
        while m < 0.5 {
            m *= 2.0;
            exp -= 1;
        }
        let mut significand = (m * (1i64 << 31) as f64).round() as i64;
        if significand == 1i64 << 31 {
            significand >>= 1;
            exp += 1;
        }
        let shift = 31 - exp;
        if !(0..=62).contains(&shift) {
            return Err(Error::Invariant(format!(
                "ratio {ratio} out of fixed-point range (shift {shift})"
            )));
        }
        Ok(FixedPointMultiplier {
            significand: significand as i32,
            shift: shift as u32,
        })
    }

    /// `round_half_away(x * significand / 2^shift)`.
    pub fn apply(&self, x: i64) -> i64 {
        let prod = x as i128 * self.significand as i128;
        let half = 1i128 << (self.shift - 1);
        let rounded = if prod >= 0 {
            (prod + half) >> self.shift
        } else {
            -((-prod + half) >> self.shift)
        };
        rounded as i64
    }
}

enum EngineOp {
    Conv {
        layer_index: usize,
        multiplier: FixedPointMultiplier,
    },
    Relu,
    /// Multiplier folds the 1/len division: in_scale / (len * out_scale).
    Gap {
        layer_index: usize,
        multiplier: FixedPointMultiplier,
    },
    Dense {
        layer_index: usize,
        multiplier: FixedPointMultiplier,
    },
}

/// A loaded quantized model with its per-layer requantization multipliers
/// precomputed. Immutable after construction; shareable across calls.
pub struct QEngine<'a> {
    model: &'a QuantizedModel,
    ops: Vec<EngineOp>,
    output_params: QuantParams,
}

fn conv_out_len(in_len: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize> {
    let span = in_len + 2 * padding;
    if span < kernel || stride == 0 {
        return Err(Error::Shape {
            layer: 0,
            message: format!("conv kernel {kernel} does not fit input length {in_len}"),
        });
    }
    Ok((span - kernel) / stride + 1)
}

impl<'a> QEngine<'a> {
    pub fn new(model: &'a QuantizedModel) -> Result<QEngine<'a>> {
        let mut ops = Vec::with_capacity(model.layers.len());
        let mut current = model.input_params;
        let mut len = model.input_len;
        for (i, layer) in model.layers.iter().enumerate() {
            match layer {
                QLayer::Conv1d(c) => {
                    let ratio = current.scale as f64 * c.weights.params.scale as f64
                        / c.out_params.scale as f64;
                    ops.push(EngineOp::Conv {
                        layer_index: i,
                        multiplier: FixedPointMultiplier::from_ratio(ratio)?,
                    });
                    len = conv_out_len(len, c.kernel, c.stride, c.padding)?;
                    current = c.out_params;
                }
                QLayer::Relu => ops.push(EngineOp::Relu),
                QLayer::GlobalAvgPool { out_params } => {
                    let ratio = current.scale as f64
                        / (len as f64 * out_params.scale as f64);
                    ops.push(EngineOp::Gap {
                        layer_index: i,
                        multiplier: FixedPointMultiplier::from_ratio(ratio)?,
                    });
                    len = 1;
                    current = *out_params;
                }
                QLayer::Dense(d) => {
                    let ratio = current.scale as f64 * d.weights.params.scale as f64
                        / d.out_params.scale as f64;
                    ops.push(EngineOp::Dense {
                        layer_index: i,
                        multiplier: FixedPointMultiplier::from_ratio(ratio)?,
                    });
                    current = d.out_params;
                }
            }
        }
        Ok(QEngine {
            model,
            ops,
            output_params: current,
        })
    }

    /// Quantizes the window, runs the integer pipeline, dequantizes the
    /// logits, and applies softmax.
    pub fn forward(&self, window: &TimeWindow) -> Result<SoftDecision> {
        if window.v_l() != self.model.input_len || self.model.input_ch != AXES {
            return Err(Error::Shape {
                layer: 0,
                message: format!(
                    "window length {} does not match model input length {}",
                    window.v_l(),
                    self.model.input_len
                ),
            });
        }
        let p = self.model.input_params;
        // Channel-major i8 activations, like the float engine's layout.
        let mut act: Vec<i8> = Vec::with_capacity(window.values().len());
        let mut len = self.model.input_len;
        let mut ch = self.model.input_ch;
        for c in 0..ch {
            for t in 0..len {
                act.push(p.quantize_value(window.value(t, c)));
            }
        }
        let mut zp = p.zero_point as i32;

        for op in &self.ops {
            match op {
                EngineOp::Conv {
                    layer_index,
                    multiplier,
                } => {
                    let QLayer::Conv1d(c) = &self.model.layers[*layer_index] else {
                        unreachable!()
                    };
                    let out_len = conv_out_len(len, c.kernel, c.stride, c.padding)?;
                    let out_zp = c.out_params.zero_point as i32;
                    let mut out = vec![0i8; c.out_ch * out_len];
                    for oc in 0..c.out_ch {
                        for t in 0..out_len {
                            let mut acc: i32 = c.bias[oc];
                            let start = (t * c.stride) as i64 - c.padding as i64;
                            for ic in 0..c.in_ch {
                                for k in 0..c.kernel {
                                    let src = start + k as i64;
                                    // Out-of-range taps are zero padding in
                                    // the real domain, i.e. (q - zp) = 0.
                                    if src < 0 || src >= len as i64 {
                                        continue;
                                    }
                                    let q_in =
                                        act[ic * len + src as usize] as i32 - zp;
                                    let q_w = c.weights.data
                                        [(oc * c.in_ch + ic) * c.kernel + k]
                                        as i32;
                                    acc += q_in * q_w;
                                }
                            }
                            let q = out_zp as i64 + multiplier.apply(acc as i64);
                            out[oc * out_len + t] = q.clamp(-128, 127) as i8;
                        }
                    }
                    act = out;
                    len = out_len;
                    ch = c.out_ch;
                    zp = out_zp;
                }
                EngineOp::Relu => {
                    // max with the zero point: the integer image of
                    // max(x, 0) under unchanged parameters.
                    let z = zp as i8;
                    for v in act.iter_mut() {
                        *v = (*v).max(z);
                    }
                }
                EngineOp::Gap {
                    layer_index,
                    multiplier,
                } => {
                    let QLayer::GlobalAvgPool { out_params } =
                        &self.model.layers[*layer_index]
                    else {
                        unreachable!()
                    };
                    let out_zp = out_params.zero_point as i32;
                    let mut out = vec![0i8; ch];
                    for c in 0..ch {
                        let sum: i64 = act[c * len..(c + 1) * len]
                            .iter()
                            .map(|&v| v as i64 - zp as i64)
                            .sum();
                        let q = out_zp as i64 + multiplier.apply(sum);
                        out[c] = q.clamp(-128, 127) as i8;
                    }
                    act = out;
                    len = 1;
                    zp = out_zp;
                }
                EngineOp::Dense {
                    layer_index,
                    multiplier,
                } => {
                    let QLayer::Dense(d) = &self.model.layers[*layer_index] else {
                        unreachable!()
                    };
                    let out_zp = d.out_params.zero_point as i32;
                    let mut out = vec![0i8; d.out_dim];
                    for o in 0..d.out_dim {
                        let mut acc: i32 = d.bias[o];
                        for i in 0..d.in_dim {
                            acc += (act[i] as i32 - zp)
                                * d.weights.data[o * d.in_dim + i] as i32;
                        }
                        let q = out_zp as i64 + multiplier.apply(acc as i64);
                        out[o] = q.clamp(-128, 127) as i8;
                    }
                    act = out;
                    ch = d.out_dim;
                    len = 1;
                    zp = out_zp;
                }
            }
        }
        let _ = ch;
        let logits: Vec<f32> = act
            .iter()
            .map(|&q| self.output_params.dequantize_value(q))
            .collect();
        Ok(softmax(&logits))
    }
}

/// One-shot convenience wrapper: loads the engine (precomputing the
/// multipliers) and runs a single window.
pub fn quantized_forward(model: &QuantizedModel, window: &TimeWindow) -> Result<SoftDecision> {
    QEngine::new(model)?.forward(window)
}

/// Wall-time statistics over repeated inference runs, in milliseconds.
#[derive(Debug, Clone, Copy)]
pub struct LatencyStats {
    pub min_ms: f64,
    pub median_ms: f64,
    pub mean_ms: f64,
    pub repetitions: usize,
}

/// Number of unmeasured warm-up runs before timing starts.
pub const WARMUP_RUNS: usize = 3;

pub fn measured_latency(
    model: &QuantizedModel,
    window: &TimeWindow,
    repetitions: usize,
) -> Result<LatencyStats> {
    if repetitions == 0 {
        return Err(Error::Config("repetitions must be >= 1".into()));
    }
    let engine = QEngine::new(model)?;
    for _ in 0..WARMUP_RUNS {
        engine.forward(window)?;
    }
    let mut times = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        engine.forward(window)?;
        times.push(start.elapsed().as_secs_f64() * 1000.0);
    }
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let min_ms = times[0];
    let median_ms = times[times.len() / 2];
    let mean_ms = times.iter().sum::<f64>() / times.len() as f64;
    Ok(LatencyStats {
        min_ms,
        median_ms,
        mean_ms,
        repetitions,
    })
}
