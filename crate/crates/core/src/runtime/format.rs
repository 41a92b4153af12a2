//! Binary model container: magic "TSM1", a version byte, a model-kind byte,
//! little-endian shape integers, raw tensor bytes, and a trailing CRC-32
//! (IEEE) over everything before it.

use crate::compress::{
    QConv1d, QDense, QLayer, QTensor, QuantParams, QuantScheme, QuantizedModel,
};
use crate::error::{Error, Result};
use crate::nnet::{BatchNorm1d, Conv1d, Dense, FloatModel, Layer};

pub const MAGIC: [u8; 4] = *b"TSM1";
pub const FORMAT_VERSION: u8 = 1;

const KIND_FLOAT: u8 = 0;
const KIND_QUANTIZED: u8 = 1;

const TAG_CONV: u8 = 0;
const TAG_BATCHNORM: u8 = 1;
const TAG_RELU: u8 = 2;
const TAG_GAP: u8 = 3;
const TAG_DENSE: u8 = 4;

const SCHEME_SYMMETRIC: u8 = 0;
const SCHEME_AFFINE: u8 = 1;

#[derive(Debug, Clone)]
pub enum Model {
    Float(FloatModel),
    Quantized(QuantizedModel),
}

struct Writer {
    bytes: Vec<u8>,
}

impl Writer {
    fn new(kind: u8) -> Writer {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&MAGIC);
        bytes.push(FORMAT_VERSION);
        bytes.push(kind);
        Writer { bytes }
    }

    fn u8(&mut self, v: u8) {
        self.bytes.push(v);
    }

    fn u32(&mut self, v: usize) {
        self.bytes.extend_from_slice(&(v as u32).to_le_bytes());
    }

    fn f32(&mut self, v: f32) {
        self.bytes.extend_from_slice(&v.to_le_bytes());
    }

    fn f32s(&mut self, vs: &[f32]) {
        self.u32(vs.len());
        for &v in vs {
            self.f32(v);
        }
    }

    fn i8s(&mut self, vs: &[i8]) {
        self.u32(vs.len());
        self.bytes.extend(vs.iter().map(|&v| v as u8));
    }

    fn i32s(&mut self, vs: &[i32]) {
        self.u32(vs.len());
        for &v in vs {
            self.bytes.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn quant_params(&mut self, p: &QuantParams) {
        self.f32(p.scale);
        self.u8(p.zero_point as u8);
        self.u8(match p.scheme {
            QuantScheme::Symmetric => SCHEME_SYMMETRIC,
            QuantScheme::Affine => SCHEME_AFFINE,
        });
    }

    fn finish(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.bytes);
        self.bytes.extend_from_slice(&crc.to_le_bytes());
        self.bytes
    }
}

pub fn serialize(model: &Model) -> Vec<u8> {
    match model {
        Model::Float(m) => serialize_float(m),
        Model::Quantized(m) => serialize_quantized(m),
    }
}

pub fn serialize_float(model: &FloatModel) -> Vec<u8> {
    let mut w = Writer::new(KIND_FLOAT);
    w.u32(model.input_len);
    w.u32(model.input_ch);
    w.u32(model.layers().len());
    for layer in model.layers() {
        match layer {
            Layer::Conv1d(c) => {
                w.u8(TAG_CONV);
                w.u32(c.out_ch);
                w.u32(c.in_ch);
                w.u32(c.kernel);
                w.u32(c.stride);
                w.u32(c.padding);
                w.f32s(&c.weights);
                w.f32s(&c.bias);
            }
            Layer::BatchNorm1d(bn) => {
                w.u8(TAG_BATCHNORM);
                w.u32(bn.channels);
                w.f32(bn.epsilon);
                w.f32(bn.momentum);
                w.f32s(&bn.gamma);
                w.f32s(&bn.beta);
                w.f32s(&bn.running_mean);
                w.f32s(&bn.running_var);
            }
            Layer::Relu => w.u8(TAG_RELU),
            Layer::GlobalAvgPool => w.u8(TAG_GAP),
            Layer::Dense(d) => {
                w.u8(TAG_DENSE);
                w.u32(d.out_dim);
                w.u32(d.in_dim);
                w.f32s(&d.weights);
                w.f32s(&d.bias);
            }
        }
    }
    w.finish()
}

pub fn serialize_quantized(model: &QuantizedModel) -> Vec<u8> {
    let mut w = Writer::new(KIND_QUANTIZED);
    w.u32(model.input_len);
    w.u32(model.input_ch);
    w.quant_params(&model.input_params);
    w.u32(model.layers.len());
    for layer in &model.layers {
        match layer {
            QLayer::Conv1d(c) => {
                w.u8(TAG_CONV);
                w.u32(c.out_ch);
                w.u32(c.in_ch);
                w.u32(c.kernel);
                w.u32(c.stride);
                w.u32(c.padding);
                w.quant_params(&c.weights.params);
                w.i8s(&c.weights.data);
                w.i32s(&c.bias);
                w.quant_params(&c.out_params);
            }
            QLayer::Relu => w.u8(TAG_RELU),
            QLayer::GlobalAvgPool { out_params } => {
                w.u8(TAG_GAP);
                w.quant_params(out_params);
            }
            QLayer::Dense(d) => {
                w.u8(TAG_DENSE);
                w.u32(d.out_dim);
                w.u32(d.in_dim);
                w.quant_params(&d.weights.params);
                w.i8s(&d.weights.data);
                w.i32s(&d.bias);
                w.quant_params(&d.out_params);
            }
        }
    }
    w.finish()
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Truncated(format!(
                "needed {n} bytes at offset {}, stream has {}",
                self.pos,
                self.bytes.len()
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self) -> Result<Vec<f32>> {
        let n = self.u32()?;
        (0..n).map(|_| self.f32()).collect()
    }

    fn i8s(&mut self) -> Result<Vec<i8>> {
        let n = self.u32()?;
        Ok(self.take(n)?.iter().map(|&b| b as i8).collect())
    }

    fn i32s(&mut self) -> Result<Vec<i32>> {
        let n = self.u32()?;
        (0..n)
            .map(|_| Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap())))
            .collect()
    }

    fn quant_params(&mut self) -> Result<QuantParams> {
        let scale = self.f32()?;
        let zero_point = self.u8()? as i8;
        let scheme = match self.u8()? {
            SCHEME_SYMMETRIC => QuantScheme::Symmetric,
            SCHEME_AFFINE => QuantScheme::Affine,
            other => {
                return Err(Error::CorruptPayload(format!(
                    "unknown quantization scheme byte {other}"
                )))
            }
        };
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::CorruptPayload(format!(
                "non-positive quantization scale {scale}"
            )));
        }
        if scheme == QuantScheme::Symmetric && zero_point != 0 {
            return Err(Error::CorruptPayload(
                "symmetric scheme with nonzero zero point".into(),
            ));
        }
        Ok(QuantParams {
            scale,
            zero_point,
            scheme,
        })
    }
}

pub fn deserialize(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < MAGIC.len() + 2 + 4 {
        return Err(Error::Truncated(format!(
            "{} bytes is too short for a model container",
            bytes.len()
        )));
    }
    if bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(bytes[4]));
    }
    let body = &bytes[..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::CrcMismatch { stored, computed });
    }
    let kind = bytes[5];
    let mut r = Reader {
        bytes: body,
        pos: 6,
    };
    let model = match kind {
        KIND_FLOAT => Model::Float(read_float(&mut r)?),
        KIND_QUANTIZED => Model::Quantized(read_quantized(&mut r)?),
        other => {
            return Err(Error::CorruptPayload(format!(
                "unknown model kind byte {other}"
            )))
        }
    };
    if r.pos != body.len() {
        return Err(Error::CorruptPayload(format!(
            "{} trailing bytes after the model body",
            body.len() - r.pos
        )));
    }
    Ok(model)
}

fn read_float(r: &mut Reader) -> Result<FloatModel> {
    let input_len = r.u32()?;
    let input_ch = r.u32()?;
    let n_layers = r.u32()?;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let tag = r.u8()?;
        layers.push(match tag {
            TAG_CONV => {
                let mut c = Conv1d::new(r.u32()?, r.u32()?, r.u32()?, r.u32()?, r.u32()?);
                c.weights = r.f32s()?;
                c.bias = r.f32s()?;
                Layer::Conv1d(c)
            }
            TAG_BATCHNORM => {
                let mut bn = BatchNorm1d::identity(r.u32()?);
                bn.epsilon = r.f32()?;
                bn.momentum = r.f32()?;
                bn.gamma = r.f32s()?;
                bn.beta = r.f32s()?;
                bn.running_mean = r.f32s()?;
                bn.running_var = r.f32s()?;
                Layer::BatchNorm1d(bn)
            }
            TAG_RELU => Layer::Relu,
            TAG_GAP => Layer::GlobalAvgPool,
            TAG_DENSE => {
                let mut d = Dense::new(r.u32()?, r.u32()?);
                d.weights = r.f32s()?;
                d.bias = r.f32s()?;
                Layer::Dense(d)
            }
            other => return Err(Error::UnknownLayerTag(other)),
        });
    }
    FloatModel::new(input_len, input_ch, layers)
}

fn read_quantized(r: &mut Reader) -> Result<QuantizedModel> {
    let input_len = r.u32()?;
    let input_ch = r.u32()?;
    let input_params = r.quant_params()?;
    let n_layers = r.u32()?;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let tag = r.u8()?;
        layers.push(match tag {
            TAG_CONV => {
                let (out_ch, in_ch, kernel, stride, padding) =
                    (r.u32()?, r.u32()?, r.u32()?, r.u32()?, r.u32()?);
                let params = r.quant_params()?;
                let data = r.i8s()?;
                if data.len() != out_ch * in_ch * kernel {
                    return Err(Error::CorruptPayload(format!(
                        "conv weight count {} does not match shape {out_ch}x{in_ch}x{kernel}",
                        data.len()
                    )));
                }
                let bias = r.i32s()?;
                let out_params = r.quant_params()?;
                QLayer::Conv1d(QConv1d {
                    out_ch,
                    in_ch,
                    kernel,
                    stride,
                    padding,
                    weights: QTensor { data, params },
                    bias,
                    out_params,
                })
            }
            TAG_RELU => QLayer::Relu,
            TAG_GAP => QLayer::GlobalAvgPool {
                out_params: r.quant_params()?,
            },
            TAG_DENSE => {
                let (out_dim, in_dim) = (r.u32()?, r.u32()?);
                let params = r.quant_params()?;
                let data = r.i8s()?;
                if data.len() != out_dim * in_dim {
                    return Err(Error::CorruptPayload(format!(
                        "dense weight count {} does not match shape {out_dim}x{in_dim}",
                        data.len()
                    )));
                }
                let bias = r.i32s()?;
                let out_params = r.quant_params()?;
                QLayer::Dense(QDense {
                    out_dim,
                    in_dim,
                    weights: QTensor { data, params },
                    bias,
                    out_params,
                })
            }
            other => return Err(Error::UnknownLayerTag(other)),
        });
    }
    Ok(QuantizedModel {
        input_len,
        input_ch,
        input_params,
        layers,
    })
}
