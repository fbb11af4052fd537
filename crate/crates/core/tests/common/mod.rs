//! Naive reference kernels and a straight-line Score-CAM, written against
//! plain `f64` slices and sharing no code with the library kernels.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scorecam_core::{Layer, ModelGraph, Tensor};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(r: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| r.random_range(lo..hi)).collect()
}

pub fn tensor64(shape: &[usize], data: Vec<f64>) -> Tensor<f64> {
    Tensor::new(shape.to_vec(), data).unwrap()
}

pub fn to64<S: scorecam_core::Scalar>(t: &Tensor<S>) -> Vec<f64> {
    t.data().iter().map(|v| v.to_f64().unwrap()).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Direct-formula cross-correlation with zero padding.
#[allow(clippy::too_many_arguments)]
pub fn conv_ref(
    x: &[f64],
    (c, h, w): (usize, usize, usize),
    wts: &[f64],
    bias: &[f64],
    (oc, kh, kw): (usize, usize, usize),
    stride: usize,
    pad: usize,
) -> (Vec<f64>, usize, usize) {
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (w + 2 * pad - kw) / stride + 1;
    let mut out = vec![0.0; oc * oh * ow];
    for o in 0..oc {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut s = bias[o];
                for i in 0..c {
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let iy = (oy * stride + ky) as i64 - pad as i64;
                            let ix = (ox * stride + kx) as i64 - pad as i64;
                            if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                s += wts[o * c * kh * kw + i * kh * kw + ky * kw + kx]
                                    * x[i * h * w + iy as usize * w + ix as usize];
                            }
                        }
                    }
                }
                out[o * oh * ow + oy * ow + ox] = s;
            }
        }
    }
    (out, oh, ow)
}

pub fn dense_ref(x: &[f64], wts: &[f64], bias: &[f64]) -> Vec<f64> {
    let d = x.len();
    (0..bias.len())
        .map(|k| bias[k] + (0..d).map(|j| wts[k * d + j] * x[j]).sum::<f64>())
        .collect()
}

pub fn maxpool_ref(x: &[f64], (c, h, w): (usize, usize, usize), win: usize, stride: usize) -> (Vec<f64>, usize, usize) {
    let oh = (h - win) / stride + 1;
    let ow = (w - win) / stride + 1;
    let mut out = Vec::new();
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut vals = Vec::new();
                for ky in 0..win {
                    for kx in 0..win {
                        vals.push(x[ch * h * w + (oy * stride + ky) * w + ox * stride + kx]);
                    }
                }
                out.push(vals.into_iter().fold(f64::NEG_INFINITY, f64::max));
            }
        }
    }
    (out, oh, ow)
}

/// Half-pixel-centre bilinear sampling, edges clamped.
pub fn bilinear_ref(x: &[f64], (c, h, w): (usize, usize, usize), oh: usize, ow: usize) -> Vec<f64> {
    let src = |o: usize, n_in: usize, n_out: usize| {
        let s = ((o as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5).clamp(0.0, (n_in - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = if i0 + 1 < n_in { i0 + 1 } else { i0 };
        (i0, i1, s - i0 as f64)
    };
    let mut out = vec![0.0; c * oh * ow];
    for ch in 0..c {
        for oy in 0..oh {
            let (y0, y1, fy) = src(oy, h, oh);
            for ox in 0..ow {
                let (x0, x1, fx) = src(ox, w, ow);
                let at = |y: usize, xx: usize| x[ch * h * w + y * w + xx];
                out[ch * oh * ow + oy * ow + ox] = at(y0, x0) * (1.0 - fy) * (1.0 - fx)
                    + at(y0, x1) * (1.0 - fy) * fx
                    + at(y1, x0) * fy * (1.0 - fx)
                    + at(y1, x1) * fy * fx;
            }
        }
    }
    out
}

pub fn softmax_ref(x: &[f64]) -> Vec<f64> {
    let e: Vec<f64> = x.iter().map(|v| v.exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

pub fn minmax_ref(x: &[f64]) -> Vec<f64> {
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// Runs `layers[..stop]` of `model`, returning the activation and its `(c, h, w)`
/// (h = w = 1 for vectors).
pub fn forward_ref(model: &ModelGraph<f64>, input: &[f64], stop: usize) -> (Vec<f64>, (usize, usize, usize)) {
    let [c, h, w] = model.input_shape();
    let mut x = input.to_vec();
    let mut dims = (c, h, w);
    for layer in &model.layers()[..stop] {
        match layer {
            Layer::Conv2d(s) => {
                let (y, oh, ow) = conv_ref(
                    &x,
                    dims,
                    s.weights.data(),
                    s.bias.data(),
                    (s.out_channels, s.kernel_h, s.kernel_w),
                    s.stride,
                    s.padding,
                );
                x = y;
                dims = (s.out_channels, oh, ow);
            }
            Layer::ReLU => x.iter_mut().for_each(|v| *v = v.max(0.0)),
            Layer::MaxPool2d { window, stride } => {
                let (y, oh, ow) = maxpool_ref(&x, dims, *window, *stride);
                x = y;
                dims = (dims.0, oh, ow);
            }
            Layer::GlobalAvgPool => {
                let plane = dims.1 * dims.2;
                x = x.chunks(plane).map(|p| p.iter().sum::<f64>() / plane as f64).collect();
                dims = (x.len(), 1, 1);
            }
            Layer::Flatten => dims = (x.len(), 1, 1),
            Layer::Dense(s) => {
                x = dense_ref(&x, s.weights.data(), s.bias.data());
                dims = (x.len(), 1, 1);
            }
            Layer::Softmax => x = softmax_ref(&x),
        }
    }
    (x, dims)
}

/// Class probability (post-softmax) or logit of the full network.
pub fn score_ref(model: &ModelGraph<f64>, input: &[f64], class: usize, logit: bool) -> f64 {
    let layers = model.layers();
    let stop = match layers.last() {
        Some(Layer::Softmax) => layers.len() - 1,
        _ => layers.len(),
    };
    let (z, _) = forward_ref(model, input, stop);
    if logit {
        z[class]
    } else {
        softmax_ref(&z)[class]
    }
}

/// Score-CAM one channel at a time: normalized upsampled masks, masked
/// forward passes against a zero baseline, softmax weights, ReLU of the
/// weighted activation sum, bilinear upsampling and min-max normalization.
/// Returns `(map, alpha)`.
pub fn scorecam_ref(
    model: &ModelGraph<f64>,
    input: &[f64],
    layer: usize,
    class: usize,
    logit: bool,
) -> (Vec<f64>, Vec<f64>) {
    let [c, h, w] = model.input_shape();
    let (act, (k, ah, aw)) = forward_ref(model, input, layer + 1);
    let base = score_ref(model, &vec![0.0; c * h * w], class, logit);
    let mut raw = Vec::with_capacity(k);
    for ch in 0..k {
        let a = &act[ch * ah * aw..(ch + 1) * ah * aw];
        let mask = minmax_ref(&bilinear_ref(a, (1, ah, aw), h, w));
        let mut masked = input.to_vec();
        for i in 0..c {
            for p in 0..h * w {
                masked[i * h * w + p] *= mask[p];
            }
        }
        raw.push(score_ref(model, &masked, class, logit) - base);
    }
    let alpha = softmax_ref(&raw);
    let mut sum = vec![0.0; ah * aw];
    for ch in 0..k {
        for p in 0..ah * aw {
            sum[p] += alpha[ch] * act[ch * ah * aw + p];
        }
    }
    let sum: Vec<f64> = sum.into_iter().map(|v| v.max(0.0)).collect();
    (minmax_ref(&bilinear_ref(&sum, (1, ah, aw), h, w)), alpha)
}

/// Sum of `map` inside `bbox` divided by the total.
pub fn box_share(map: &[f64], w: usize, bbox: &scorecam_core::BBox) -> f64 {
    let mut inside = 0.0;
    let mut total = 0.0;
    for (i, v) in map.iter().enumerate() {
        let (row, col) = (i / w, i % w);
        if row >= bbox.y && row < bbox.y + bbox.h && col >= bbox.x && col < bbox.x + bbox.w {
            inside += v;
        }
        total += v;
    }
    inside / total
}

fn normal_tensor(r: &mut ChaCha8Rng, shape: Vec<usize>, std: f64) -> Tensor<f32> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            // Box-Muller keeps this file free of the library's sampler.
            let (u, v): (f64, f64) = (r.random_range(1e-12..1.0), r.random_range(0.0..1.0));
            (std * (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()) as f32
        })
        .collect();
    Tensor::new(shape, data).unwrap()
}

/// Small random CNN: conv relu [maxpool] conv relu gap dense, with an
/// optional trailing softmax. Returns the model and a matching random input.
pub fn random_cnn(seed: u64) -> (ModelGraph<f32>, Tensor<f32>) {
    use scorecam_core::{ConvSpec, DenseSpec};
    let mut r = rng(seed);
    let c = r.random_range(1..=3usize);
    let size = r.random_range(6..=12usize);
    let k1 = r.random_range(2..=5usize);
    let k2 = r.random_range(2..=6usize);
    let classes = r.random_range(2..=5usize);
    let conv = |r: &mut ChaCha8Rng, out: usize, inp: usize| {
        Layer::Conv2d(
            ConvSpec::new(
                normal_tensor(r, vec![out, inp, 3, 3], (2.0 / (9 * inp) as f64).sqrt()),
                normal_tensor(r, vec![out], 0.1),
                1,
                1,
            )
            .unwrap(),
        )
    };
    let mut layers = vec![conv(&mut r, k1, c), Layer::ReLU];
    if r.random_bool(0.5) {
        layers.push(Layer::MaxPool2d { window: 2, stride: 2 });
    }
    layers.push(conv(&mut r, k2, k1));
    layers.push(Layer::ReLU);
    layers.push(Layer::GlobalAvgPool);
    layers.push(Layer::Dense(
        DenseSpec::new(
            normal_tensor(&mut r, vec![classes, k2], 2.0),
            normal_tensor(&mut r, vec![classes], 0.5),
        )
        .unwrap(),
    ));
    if r.random_bool(0.3) {
        layers.push(Layer::Softmax);
    }
    let model = ModelGraph::new([c, size, size], classes, None, layers).unwrap();
    let input = Tensor::from_fn(vec![c, size, size], |_| r.random_range(-1.0..1.0f32)).unwrap();
    (model, input)
}
