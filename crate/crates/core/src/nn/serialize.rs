//! Little-endian model files.
//!
//! ```text
//! "RFNN" | version u32 | layer count u32
//! per layer: kind u8 | hyperparameters (u32 each) | tensors
//! tensor:   ndims u32 | dims u32... | f64 values
//! trailer:  config length u32 | UTF-8 JSON config
//! ```
//!
//! Kinds: 1 conv2d (in, out, kernel, stride, padding; weight, bias),
//! 2 linear (in, out; weight, bias), 3 relu, 4 sigmoid, 5 avg pool (kernel),
//! 6 adaptive avg pool (height, width), 7 flatten.

use std::path::Path;

use crate::error::{Error, Result};

use super::layers::{Activation, AdaptiveAvgPool2d, AvgPool2d, Conv2d, Layer, Linear};
use super::tensor::Tensor;

pub const MODEL_MAGIC: &[u8; 4] = b"RFNN";
pub const MODEL_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_tensor(out: &mut Vec<u8>, t: &Tensor) {
    put_u32(out, t.shape().len());
    for &d in t.shape() {
        put_u32(out, d);
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_model<'a, I>(layers: I, config_json: &str) -> Vec<u8>
where
    I: IntoIterator<Item = &'a Layer>,
{
    let layers: Vec<&Layer> = layers.into_iter().collect();
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    put_u32(&mut out, MODEL_VERSION as usize);
    put_u32(&mut out, layers.len());
    for layer in layers {
        match layer {
            Layer::Conv2d(c) => {
                out.push(1);
                for v in [c.in_channels, c.out_channels, c.kernel, c.stride, c.padding] {
                    put_u32(&mut out, v);
                }
                put_tensor(&mut out, &c.weight);
                put_tensor(&mut out, &c.bias);
            }
            Layer::Linear(l) => {
                out.push(2);
                put_u32(&mut out, l.in_features);
                put_u32(&mut out, l.out_features);
                put_tensor(&mut out, &l.weight);
                put_tensor(&mut out, &l.bias);
            }
            Layer::Activation(Activation::Relu) => out.push(3),
            Layer::Activation(Activation::Sigmoid) => out.push(4),
            Layer::AvgPool(p) => {
                out.push(5);
                put_u32(&mut out, p.kernel);
            }
            Layer::AdaptiveAvgPool(p) => {
                out.push(6);
                put_u32(&mut out, p.out_height);
                put_u32(&mut out, p.out_width);
            }
            Layer::Flatten => out.push(7),
        }
    }
    put_u32(&mut out, config_json.len());
    out.extend_from_slice(config_json.as_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::ShapeMismatch(format!("model file truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn tensor(&mut self, expected: &[usize]) -> Result<Tensor> {
        let nd = self.u32()?;
        let shape = (0..nd).map(|_| self.u32()).collect::<Result<Vec<_>>>()?;
        if shape != expected {
            return Err(Error::ShapeMismatch(format!("stored tensor {shape:?}, layer needs {expected:?}")));
        }
        let n: usize = shape.iter().product();
        let data = self
            .take(n.checked_mul(8).ok_or_else(|| Error::ShapeMismatch("tensor too large".into()))?)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Tensor::new(shape, data)
    }
}

/// Decodes a model file into its layers and the JSON config trailer.
pub fn decode_model(bytes: &[u8]) -> Result<(Vec<Layer>, String)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MODEL_MAGIC {
        return Err(Error::ShapeMismatch("not a model file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != MODEL_VERSION as usize {
        return Err(Error::ShapeMismatch(format!("unsupported model version {version}")));
    }
    let count = r.u32()?;
    let mut layers = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let layer = match r.u8()? {
            1 => {
                let [i, o, k, s, p] = [r.u32()?, r.u32()?, r.u32()?, r.u32()?, r.u32()?];
                Layer::Conv2d(Conv2d {
                    in_channels: i,
                    out_channels: o,
                    kernel: k,
                    stride: s,
                    padding: p,
                    weight: r.tensor(&[o, i, k, k])?,
                    bias: r.tensor(&[o])?,
                })
            }
            2 => {
                let (i, o) = (r.u32()?, r.u32()?);
                Layer::Linear(Linear {
                    in_features: i,
                    out_features: o,
                    weight: r.tensor(&[o, i])?,
                    bias: r.tensor(&[o])?,
                })
            }
            3 => Layer::Activation(Activation::Relu),
            4 => Layer::Activation(Activation::Sigmoid),
            5 => Layer::AvgPool(AvgPool2d { kernel: r.u32()? }),
            6 => Layer::AdaptiveAvgPool(AdaptiveAvgPool2d {
                out_height: r.u32()?,
                out_width: r.u32()?,
            }),
            7 => Layer::Flatten,
            k => return Err(Error::ShapeMismatch(format!("unknown layer kind {k}"))),
        };
        layers.push(layer);
    }
    let len = r.u32()?;
    let config = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| Error::ShapeMismatch("config is not UTF-8".into()))?;
    if r.pos != bytes.len() {
        return Err(Error::ShapeMismatch(format!("{} trailing bytes after model", bytes.len() - r.pos)));
    }
    Ok((layers, config))
}

pub fn read_model_file(path: &Path) -> Result<(Vec<Layer>, String)> {
    decode_model(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
