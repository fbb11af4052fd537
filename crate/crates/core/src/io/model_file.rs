//! `SCAM` model files.
//!
//! Layout, all integers `u32` little-endian and all floats `f32` little-endian:
//!
//! ```text
//! "SCAM" version(=1) class_count C H W layer_count
//! layer*: tag:u8 params:u32* payload:f32*
//! [class-name trailer: count (len utf8-bytes)*]
//! ```
//!
//! | tag | kind          | params                               | payload            |
//! |-----|---------------|--------------------------------------|--------------------|
//! | 0   | Conv2d        | out, in, kh, kw, stride, padding     | weights, then bias |
//! | 1   | ReLU          |                                      |                    |
//! | 2   | MaxPool2d     | window, stride                       |                    |
//! | 3   | GlobalAvgPool |                                      |                    |
//! | 4   | Flatten       |                                      |                    |
//! | 5   | Dense         | out, in                              | weights, then bias |
//! | 6   | Softmax       |                                      |                    |
//!
//! The class-name trailer is optional; when present its count equals
//! `class_count`.

use std::path::Path;

use super::bytes::{checked_product, Reader, Writer};
use crate::error::{Error, Result};
use crate::kernels::{ConvSpec, DenseSpec};
use crate::model::{Layer, ModelGraph};
use crate::tensor::Tensor;

pub const MAGIC: [u8; 4] = *b"SCAM";
pub const VERSION: u32 = 1;

const TAG_CONV: u8 = 0;
const TAG_RELU: u8 = 1;
const TAG_MAXPOOL: u8 = 2;
const TAG_GAP: u8 = 3;
const TAG_FLATTEN: u8 = 4;
const TAG_DENSE: u8 = 5;
const TAG_SOFTMAX: u8 = 6;

fn tensor(r: &mut Reader<'_>, shape: Vec<usize>) -> Result<Tensor<f32>> {
    let n = checked_product(&shape)?;
    let data = r.f32s(n)?;
    Tensor::new(shape, data)
}

fn decode_layer(r: &mut Reader<'_>, index: usize) -> Result<Layer<f32>> {
    let tag = r.u8()?;
    Ok(match tag {
        TAG_CONV => {
            let (out, inp, kh, kw) = (r.usize()?, r.usize()?, r.usize()?, r.usize()?);
            let (stride, padding) = (r.usize()?, r.usize()?);
            let weights = tensor(r, vec![out, inp, kh, kw])?;
            let bias = tensor(r, vec![out])?;
            Layer::Conv2d(ConvSpec::new(weights, bias, stride, padding)?)
        }
        TAG_RELU => Layer::ReLU,
        TAG_MAXPOOL => Layer::MaxPool2d {
            window: r.usize()?,
            stride: r.usize()?,
        },
        TAG_GAP => Layer::GlobalAvgPool,
        TAG_FLATTEN => Layer::Flatten,
        TAG_DENSE => {
            let (out, inp) = (r.usize()?, r.usize()?);
            let weights = tensor(r, vec![out, inp])?;
            let bias = tensor(r, vec![out])?;
            Layer::Dense(DenseSpec::new(weights, bias)?)
        }
        TAG_SOFTMAX => Layer::Softmax,
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "layer {index} has unknown kind tag {other}"
            )))
        }
    })
}

fn decode_names(r: &mut Reader<'_>) -> Result<Vec<String>> {
    let count = r.usize()?;
    let mut names = Vec::new();
    for _ in 0..count {
        let len = r.usize()?;
        let raw = r.take(len)?;
        let name = std::str::from_utf8(raw).map_err(|_| Error::UnsupportedFormat("class name is not UTF-8".into()))?;
        names.push(name.to_string());
    }
    Ok(names)
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelGraph<f32>> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::VersionUnsupported(version));
    }
    let class_count = r.usize()?;
    let input_shape = [r.usize()?, r.usize()?, r.usize()?];
    let layer_count = r.usize()?;
    let mut layers = Vec::new();
    for i in 0..layer_count {
        layers.push(decode_layer(&mut r, i)?);
    }
    let class_names = match r.remaining() {
        0 => None,
        _ => Some(decode_names(&mut r)?),
    };
    r.finish()?;
    ModelGraph::new(input_shape, class_count, class_names, layers)
}

pub fn encode_model(model: &ModelGraph<f32>) -> Vec<u8> {
    encode_parts(
        model.class_count(),
        model.input_shape(),
        model.layers(),
        model.class_names(),
    )
}

fn encode_parts(
    class_count: usize,
    input_shape: [usize; 3],
    layers: &[Layer<f32>],
    class_names: Option<&[String]>,
) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(&MAGIC);
    w.u32(VERSION as usize);
    w.u32(class_count);
    for d in input_shape {
        w.u32(d);
    }
    w.u32(layers.len());
    for layer in layers {
        match layer {
            Layer::Conv2d(s) => {
                w.u8(TAG_CONV);
                for v in [
                    s.out_channels,
                    s.in_channels,
                    s.kernel_h,
                    s.kernel_w,
                    s.stride,
                    s.padding,
                ] {
                    w.u32(v);
                }
                w.f32s(s.weights.data());
                w.f32s(s.bias.data());
            }
            Layer::ReLU => w.u8(TAG_RELU),
            Layer::MaxPool2d { window, stride } => {
                w.u8(TAG_MAXPOOL);
                w.u32(*window);
                w.u32(*stride);
            }
            Layer::GlobalAvgPool => w.u8(TAG_GAP),
            Layer::Flatten => w.u8(TAG_FLATTEN),
            Layer::Dense(s) => {
                w.u8(TAG_DENSE);
                w.u32(s.out_features());
                w.u32(s.in_features());
                w.f32s(s.weights.data());
                w.f32s(s.bias.data());
            }
            Layer::Softmax => w.u8(TAG_SOFTMAX),
        }
    }
    if let Some(names) = class_names {
        w.u32(names.len());
        for name in names {
            w.u32(name.len());
            w.bytes(name.as_bytes());
        }
    }
    w.buf
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelGraph<f32>> {
    let path = path.as_ref();
    let bytes = super::read_file(path)?;
    decode_model(&bytes).map_err(|e| e.in_file(path))
}

pub fn save_model(model: &ModelGraph<f32>, path: impl AsRef<Path>) -> Result<()> {
    super::write_file(path.as_ref(), &encode_model(model))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(names: bool) -> ModelGraph<f32> {
        let conv = ConvSpec::new(
            Tensor::from_fn(vec![2, 1, 3, 3], |i| i as f32 * 0.5 - 2.0).unwrap(),
            Tensor::new(vec![2], vec![0.25, -0.125]).unwrap(),
            1,
            1,
        )
        .unwrap();
        let dense = DenseSpec::new(
            Tensor::from_fn(vec![3, 2], |i| i as f32).unwrap(),
            Tensor::zeros(vec![3]).unwrap(),
        )
        .unwrap();
        ModelGraph::new(
            [1, 4, 4],
            3,
            names.then(|| vec!["a".into(), "bee".into(), "ç".into()]),
            vec![
                Layer::Conv2d(conv),
                Layer::ReLU,
                Layer::MaxPool2d { window: 2, stride: 2 },
                Layer::GlobalAvgPool,
                Layer::Dense(dense),
                Layer::Softmax,
            ],
        )
        .unwrap()
    }

    #[test]
    fn round_trip_with_and_without_names() {
        for names in [false, true] {
            let m = model(names);
            let bytes = encode_model(&m);
            let back = decode_model(&bytes).unwrap();
            assert_eq!(back, m);
            assert_eq!(encode_model(&back), bytes);
        }
    }

    #[test]
    fn header_layout() {
        let bytes = encode_model(&model(false));
        assert_eq!(&bytes[..4], b"SCAM");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[24..28].try_into().unwrap()), 6);
        assert_eq!(bytes[28], TAG_CONV);
    }

    #[test]
    fn wrong_magic() {
        let mut bytes = encode_model(&model(false));
        bytes[0] = b'X';
        assert!(matches!(decode_model(&bytes), Err(Error::MagicMismatch { .. })));
    }

    #[test]
    fn unsupported_version() {
        let mut bytes = encode_model(&model(false));
        bytes[4] = 2;
        assert!(matches!(decode_model(&bytes), Err(Error::VersionUnsupported(2))));
    }

    #[test]
    fn truncation_anywhere_is_detected() {
        let bytes = encode_model(&model(true));
        for cut in [0, 2, 7, 20, 29, 60, bytes.len() - 1] {
            let err = decode_model(&bytes[..cut]).unwrap_err();
            assert!(matches!(err, Error::TruncatedFile { .. }), "cut {cut}: {err}");
        }
    }

    #[test]
    fn channel_mismatch_is_a_load_time_shape_error() {
        let conv = |out: usize, inp: usize| {
            Layer::Conv2d(
                ConvSpec::new(
                    Tensor::zeros(vec![out, inp, 1, 1]).unwrap(),
                    Tensor::zeros(vec![out]).unwrap(),
                    1,
                    0,
                )
                .unwrap(),
            )
        };
        let layers = [conv(2, 1), conv(1, 3), Layer::GlobalAvgPool];
        let bytes = encode_parts(1, [1, 4, 4], &layers, None);
        let err = decode_model(&bytes).unwrap_err();
        assert!(matches!(err, Error::Shape(_)), "{err}");
        let msg = err.to_string();
        assert!(msg.contains("layer 1") && msg.contains("layer 0"), "{msg}");
    }

    #[test]
    fn unwritable_path_names_the_path() {
        let err = save_model(&model(false), "/nonexistent-dir/x/model.scam").unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x/model.scam"));
    }
}
