//! Forward-only tensor kernels.
//!
//! Every kernel is a pure function. Reductions accumulate in `f64`, visiting
//! terms in canonical memory order with a single accumulator per output
//! element, so results are bit-reproducible regardless of how callers
//! schedule work across threads.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Parameters of a 2-D convolution (cross-correlation) layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvSpec<S> {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
    /// `[out, in, kh, kw]`
    pub weights: Tensor<S>,
    /// `[out]`
    pub bias: Tensor<S>,
}

impl<S: Scalar> ConvSpec<S> {
    /// Channel counts and kernel size are taken from the weight shape.
    pub fn new(weights: Tensor<S>, bias: Tensor<S>, stride: usize, padding: usize) -> Result<Self> {
        let [out_channels, in_channels, kernel_h, kernel_w] = *weights.shape() else {
            return Err(Error::shape(format!(
                "conv weights must be [out,in,kh,kw], got {:?}",
                weights.shape()
            )));
        };
        let spec = ConvSpec {
            out_channels,
            in_channels,
            kernel_h,
            kernel_w,
            stride,
            padding,
            weights,
            bias,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 {
            return Err(Error::shape("conv stride must be positive"));
        }
        let expected = [self.out_channels, self.in_channels, self.kernel_h, self.kernel_w];
        if self.weights.shape() != expected {
            return Err(Error::shape(format!(
                "conv weights have shape {:?}, declared {expected:?}",
                self.weights.shape()
            )));
        }
        if self.bias.shape() != [self.out_channels] {
            return Err(Error::shape(format!(
                "conv bias has shape {:?}, declared [{}]",
                self.bias.shape(),
                self.out_channels
            )));
        }
        Ok(())
    }

    /// Output spatial size for an `h × w` input.
    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let axis = |size: usize, k: usize, name: &str| -> Result<usize> {
            let padded = size + 2 * self.padding;
            if padded < k {
                return Err(Error::shape(format!(
                    "conv kernel {name} {k} exceeds padded input {padded}"
                )));
            }
            if !(padded - k).is_multiple_of(self.stride) {
                return Err(Error::shape(format!(
                    "conv output {name} is not integral: ({size} + 2*{} - {k}) / {} ",
                    self.padding, self.stride
                )));
            }
            Ok((padded - k) / self.stride + 1)
        };
        Ok((axis(h, self.kernel_h, "height")?, axis(w, self.kernel_w, "width")?))
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Parameters of a fully connected layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSpec<S> {
    /// `[K, D]`
    pub weights: Tensor<S>,
    /// `[K]`
    pub bias: Tensor<S>,
}

impl<S: Scalar> DenseSpec<S> {
    pub fn new(weights: Tensor<S>, bias: Tensor<S>) -> Result<Self> {
        let spec = DenseSpec { weights, bias };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let [k, _] = *self.weights.shape() else {
            return Err(Error::shape(format!(
                "dense weights must be [K,D], got {:?}",
                self.weights.shape()
            )));
        };
        if self.bias.shape() != [k] {
            return Err(Error::shape(format!(
                "dense bias has shape {:?}, expected [{k}]",
                self.bias.shape()
            )));
        }
        Ok(())
    }

    pub fn out_features(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_features(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

pub fn conv2d<S: Scalar>(input: &Tensor<S>, spec: &ConvSpec<S>) -> Result<Tensor<S>> {
    let (c, h, w) = input.chw()?;
    if c != spec.in_channels {
        return Err(Error::shape(format!(
            "conv expects {} input channels, got {c}",
            spec.in_channels
        )));
    }
    let (oh, ow) = spec.output_hw(h, w)?;
    let (kh, kw, stride) = (spec.kernel_h, spec.kernel_w, spec.stride);
    let pad = spec.padding as isize;
    let x = input.data();
    let wts = spec.weights.data();
    let mut out = Vec::with_capacity(spec.out_channels * oh * ow);
    let mut acc = vec![0.0f64; oh * ow];

    for oc in 0..spec.out_channels {
        acc.iter_mut().for_each(|a| *a = 0.0);
        // Terms of each output element are added in (ic, ky, kx) order.
        for ic in 0..c {
            let plane = &x[ic * h * w..(ic + 1) * h * w];
            for ky in 0..kh {
                for kx in 0..kw {
                    let wv = wts[((oc * c + ic) * kh + ky) * kw + kx].acc();
                    for oy in 0..oh {
                        let iy = (oy * stride + ky) as isize - pad;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let row = &plane[iy as usize * w..(iy as usize + 1) * w];
                        let acc_row = &mut acc[oy * ow..(oy + 1) * ow];
                        for (ox, a) in acc_row.iter_mut().enumerate() {
                            let ix = (ox * stride + kx) as isize - pad;
                            if ix >= 0 && ix < w as isize {
                                *a += wv * row[ix as usize].acc();
                            }
                        }
                    }
                }
            }
        }
        let b = spec.bias.data()[oc].acc();
        out.extend(acc.iter().map(|&a| S::from_acc(a + b)));
    }
    Tensor::new(vec![spec.out_channels, oh, ow], out)
}

pub fn relu<S: Scalar>(input: &Tensor<S>) -> Tensor<S> {
    input.map(|x| if x > S::zero() { x } else { S::zero() })
}

/// Max pooling with floor-mode output size.
pub fn maxpool2d<S: Scalar>(input: &Tensor<S>, window: usize, stride: usize) -> Result<Tensor<S>> {
    let (c, h, w) = input.chw()?;
    let (oh, ow) = pool_output_hw(h, w, window, stride)?;
    let x = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let plane = &x[ch * h * w..(ch + 1) * h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut m = S::neg_infinity();
                for ky in 0..window {
                    for kx in 0..window {
                        m = m.max(plane[(oy * stride + ky) * w + ox * stride + kx]);
                    }
                }
                out.push(m);
            }
        }
    }
    Tensor::new(vec![c, oh, ow], out)
}

pub fn pool_output_hw(h: usize, w: usize, window: usize, stride: usize) -> Result<(usize, usize)> {
    if window == 0 || stride == 0 {
        return Err(Error::shape("pool window and stride must be positive"));
    }
    if h < window || w < window {
        return Err(Error::shape(format!("pool window {window} exceeds input {h}x{w}")));
    }
    Ok(((h - window) / stride + 1, (w - window) / stride + 1))
}

/// `[C,H,W] -> [C]` spatial mean.
pub fn global_avg_pool<S: Scalar>(input: &Tensor<S>) -> Result<Tensor<S>> {
    let (c, h, w) = input.chw()?;
    let n = (h * w) as f64;
    let out = input
        .data()
        .chunks(h * w)
        .map(|plane| S::from_acc(plane.iter().fold(0.0, |a, &x| a + x.acc()) / n))
        .collect();
    Tensor::new(vec![c], out)
}

pub fn flatten<S: Scalar>(input: &Tensor<S>) -> Tensor<S> {
    let n = input.len();
    input.clone().reshape(vec![n]).expect("flatten preserves element count")
}

pub fn dense<S: Scalar>(input: &Tensor<S>, spec: &DenseSpec<S>) -> Result<Tensor<S>> {
    if input.rank() != 1 || input.len() != spec.in_features() {
        return Err(Error::shape(format!(
            "dense expects a [{}] vector, got {:?}",
            spec.in_features(),
            input.shape()
        )));
    }
    let x = input.data();
    let out = spec
        .weights
        .data()
        .chunks(spec.in_features())
        .zip(spec.bias.data())
        .map(|(row, &b)| {
            let s = row.iter().zip(x).fold(0.0f64, |a, (&w, &v)| a + w.acc() * v.acc());
            S::from_acc(s + b.acc())
        })
        .collect();
    Tensor::new(vec![spec.out_features()], out)
}

/// Softmax over all elements, stabilised by subtracting the maximum.
pub fn softmax<S: Scalar>(input: &Tensor<S>) -> Tensor<S> {
    let max = input.data().iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x.acc()));
    let exps: Vec<f64> = input.data().iter().map(|&x| (x.acc() - max).exp()).collect();
    let total = exps.iter().fold(0.0, |a, &e| a + e);
    Tensor::new(
        input.shape().to_vec(),
        exps.iter().map(|&e| S::from_acc(e / total)).collect(),
    )
    .expect("softmax preserves shape")
}

/// Per-axis sample positions for half-pixel-centre bilinear resampling:
/// `(low index, high index, weight of high)`.
fn bilinear_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let pos = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
            let lo = (pos.floor() as usize).min(src - 1);
            let hi = (lo + 1).min(src - 1);
            (lo, hi, pos - lo as f64)
        })
        .collect()
}

/// Bilinear resize of every channel of a `[C,h,w]` tensor, align-corners=false.
pub fn bilinear_resize<S: Scalar>(input: &Tensor<S>, target_h: usize, target_w: usize) -> Result<Tensor<S>> {
    let (c, h, w) = input.chw()?;
    if target_h == 0 || target_w == 0 {
        return Err(Error::shape(format!(
            "resize target {target_h}x{target_w} has a zero dimension"
        )));
    }
    let ys = bilinear_taps(h, target_h);
    let xs = bilinear_taps(w, target_w);
    let x = input.data();
    let mut out = Vec::with_capacity(c * target_h * target_w);
    for ch in 0..c {
        let plane = &x[ch * h * w..(ch + 1) * h * w];
        for &(y0, y1, ly) in &ys {
            for &(x0, x1, lx) in &xs {
                let top = (1.0 - lx) * plane[y0 * w + x0].acc() + lx * plane[y0 * w + x1].acc();
                let bottom = (1.0 - lx) * plane[y1 * w + x0].acc() + lx * plane[y1 * w + x1].acc();
                out.push(S::from_acc((1.0 - ly) * top + ly * bottom));
            }
        }
    }
    Tensor::new(vec![c, target_h, target_w], out)
}

/// Nearest-neighbour resize, source index `floor(dst * src / dst_size)`.
pub fn nearest_resize<S: Scalar>(input: &Tensor<S>, target_h: usize, target_w: usize) -> Result<Tensor<S>> {
    let (c, h, w) = input.chw()?;
    if target_h == 0 || target_w == 0 {
        return Err(Error::shape(format!(
            "resize target {target_h}x{target_w} has a zero dimension"
        )));
    }
    let x = input.data();
    let mut out = Vec::with_capacity(c * target_h * target_w);
    for ch in 0..c {
        let plane = &x[ch * h * w..(ch + 1) * h * w];
        for oy in 0..target_h {
            let iy = (oy * h / target_h).min(h - 1);
            for ox in 0..target_w {
                let ix = (ox * w / target_w).min(w - 1);
                out.push(plane[iy * w + ix]);
            }
        }
    }
    Tensor::new(vec![c, target_h, target_w], out)
}

/// Elementwise product. `b` may be a single-channel `[1,H,W]` mask that is
/// broadcast over the channels of a `[C,H,W]` tensor.
pub fn hadamard<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    if a.shape() == b.shape() {
        let data = a.data().iter().zip(b.data()).map(|(&x, &y)| x * y).collect();
        return Tensor::new(a.shape().to_vec(), data);
    }
    match (a.shape(), b.shape()) {
        (&[c, h, w], &[1, bh, bw]) if (h, w) == (bh, bw) => {
            let mask = b.data();
            let data = a
                .data()
                .chunks(h * w)
                .flat_map(|plane| plane.iter().zip(mask).map(|(&x, &m)| x * m))
                .collect();
            Tensor::new(vec![c, h, w], data)
        }
        _ => Err(Error::shape(format!("hadamard of {:?} and {:?}", a.shape(), b.shape()))),
    }
}

/// Rescales to `[0, 1]` by `(x - min) / (max - min)`; a constant tensor maps
/// to all zeros.
pub fn minmax_normalize<S: Scalar>(input: &Tensor<S>) -> Tensor<S> {
    let (lo, hi) = input.min_max();
    if hi <= lo {
        return input.map(|_| S::zero());
    }
    let range = hi - lo;
    input.map(|x| (x - lo) / range)
}

/// Index of the maximum; ties resolve to the lowest index.
pub fn argmax<S: Scalar>(input: &Tensor<S>) -> usize {
    let mut best = 0;
    for (i, &x) in input.data().iter().enumerate() {
        if x > input.data()[best] {
            best = i;
        }
    }
    best
}
