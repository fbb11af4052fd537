//! Seeded synthetic models and inputs with known ground truth, used by the
//! test suites, the bundled fixtures, and for smoke-testing the CLI.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::io::BBox;
use crate::kernels::{ConvSpec, DenseSpec};
use crate::model::{Layer, ModelGraph};
use crate::saliency::SaliencyMap;
use crate::tensor::Tensor;

pub const REGION_SIZE: usize = 16;
pub const REGION_GAIN: f32 = 10.0;
pub const REGION_THRESHOLD: f32 = 0.5;
pub const SPLIT_SIZE: usize = 16;
pub const SPLIT_GAIN: f32 = 20.0;
pub const SPLIT_BLOB: usize = 5;
/// Seeds of the committed `tiny_cnn.scam` / `tiny.ppm` fixtures.
pub const FIXTURE_MODEL_SEED: u64 = 7;
pub const FIXTURE_IMAGE_SEED: u64 = 11;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// 3×3 same-padding conv whose output channel `k` is `bias[k] + Σ_c taps[k][c] · x_c`
/// at the kernel centre only.
fn centre_tap_conv(taps: &[[f32; 3]], bias: &[f32]) -> Layer<f32> {
    let out = taps.len();
    let mut w = vec![0.0f32; out * 3 * 9];
    for (k, row) in taps.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            w[(k * 3 + c) * 9 + 4] = v;
        }
    }
    Layer::Conv2d(
        ConvSpec::new(
            Tensor::new(vec![out, 3, 3, 3], w).expect("conv weights"),
            Tensor::new(vec![out], bias.to_vec()).expect("conv bias"),
            1,
            1,
        )
        .expect("valid conv"),
    )
}

fn dense(weights: Vec<f32>, bias: Vec<f32>) -> Layer<f32> {
    let k = bias.len();
    let d = weights.len() / k;
    Layer::Dense(
        DenseSpec::new(
            Tensor::new(vec![k, d], weights).expect("dense weights"),
            Tensor::new(vec![k], bias).expect("dense bias"),
        )
        .expect("valid dense"),
    )
}

/// A model whose class-0 logit is `gain · mean(x̄ over region)` where `x̄` is
/// the channel mean, and whose class-1 logit is the constant
/// `gain · threshold`. The target conv layer (index 0) has two channels:
/// `x̄` and `1 - x̄`.
pub fn region_model(size: usize, region: BBox, gain: f32, threshold: f32) -> ModelGraph<f32> {
    let third = 1.0 / 3.0;
    let conv = centre_tap_conv(&[[third; 3], [-third; 3]], &[0.0, 1.0]);
    let plane = size * size;
    let mut w = vec![0.0f32; 2 * 2 * plane];
    let per_pixel = gain / region.area() as f32;
    for row in 0..size {
        for col in 0..size {
            if region.contains(row, col) {
                w[row * size + col] = per_pixel;
            }
        }
    }
    ModelGraph::new(
        [3, size, size],
        2,
        Some(vec!["region".into(), "background".into()]),
        vec![conv, Layer::ReLU, Layer::Flatten, dense(w, vec![0.0, gain * threshold])],
    )
    .expect("valid region model")
}

/// Region model plus an image that is brighter inside the region.
#[derive(Debug, Clone)]
pub struct RegionInstance {
    pub model: ModelGraph<f32>,
    pub image: Tensor<f32>,
    pub region: BBox,
}

/// Region sides are drawn from 9..=11 on a 16×16 image; pixels are
/// `U(0.5, 1)` inside the region and `U(0, 0.5)` outside, per channel.
pub fn region_instance(seed: u64) -> RegionInstance {
    let mut r = rng(seed);
    let size = REGION_SIZE;
    let (w, h) = (r.random_range(9..=11), r.random_range(9..=11));
    let region = BBox {
        x: r.random_range(0..=size - w),
        y: r.random_range(0..=size - h),
        w,
        h,
    };
    let plane = size * size;
    let image = Tensor::from_fn(vec![3, size, size], |i| {
        let p = i % plane;
        let base = if region.contains(p / size, p % size) { 0.5 } else { 0.0 };
        base + r.random_range(0.0..0.5f32)
    })
    .expect("image shape");
    RegionInstance {
        model: region_model(size, region, REGION_GAIN, REGION_THRESHOLD),
        image,
        region,
    }
}

/// Two-class model: class 0 reads only the left half of the image, class 1
/// only the right half. Its conv channels pass through the red and green
/// input channels.
pub fn split_model(size: usize, gain: f32) -> ModelGraph<f32> {
    let conv = centre_tap_conv(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], &[0.0, 0.0]);
    let plane = size * size;
    let half = size / 2;
    let per_pixel = gain / (size * half) as f32;
    let mut w = vec![0.0f32; 2 * 2 * plane];
    for ch in 0..2 {
        for row in 0..size {
            for col in 0..size {
                let class = usize::from(col >= half);
                w[class * 2 * plane + ch * plane + row * size + col] = per_pixel;
            }
        }
    }
    ModelGraph::new(
        [3, size, size],
        2,
        Some(vec!["left".into(), "right".into()]),
        vec![conv, Layer::ReLU, Layer::Flatten, dense(w, vec![0.0, 0.0])],
    )
    .expect("valid split model")
}

#[derive(Debug, Clone)]
pub struct SplitInstance {
    pub model: ModelGraph<f32>,
    pub image: Tensor<f32>,
    /// Red object, inside the left half.
    pub left_blob: BBox,
    /// Green object, inside the right half.
    pub right_blob: BBox,
}

/// Background `U(0, 0.2)` on every channel; a red 5×5 blob somewhere in the
/// left half and a green one in the right half, with `U(0.7, 1)` intensity.
pub fn split_instance(seed: u64) -> SplitInstance {
    let mut r = rng(seed);
    let size = SPLIT_SIZE;
    let half = size / 2;
    let b = SPLIT_BLOB;
    let left_blob = BBox {
        x: r.random_range(0..=half - b),
        y: r.random_range(0..=size - b),
        w: b,
        h: b,
    };
    let right_blob = BBox {
        x: half + r.random_range(0..=half - b),
        y: r.random_range(0..=size - b),
        w: b,
        h: b,
    };
    let plane = size * size;
    let image = Tensor::from_fn(vec![3, size, size], |i| {
        let (ch, p) = (i / plane, i % plane);
        let (row, col) = (p / size, p % size);
        let lit = (ch == 0 && left_blob.contains(row, col)) || (ch == 1 && right_blob.contains(row, col));
        if lit {
            r.random_range(0.7..1.0f32)
        } else {
            r.random_range(0.0..0.2f32)
        }
    })
    .expect("image shape");
    SplitInstance {
        model: split_model(size, SPLIT_GAIN),
        image,
        left_blob,
        right_blob,
    }
}

fn he_tensor(r: &mut ChaCha8Rng, shape: Vec<usize>, fan_in: usize) -> Tensor<f32> {
    let dist = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| dist.sample(r) as f32).collect()).expect("shape")
}

fn small_bias(r: &mut ChaCha8Rng, n: usize) -> Tensor<f32> {
    let dist = Normal::new(0.0, 0.01).expect("positive std");
    Tensor::new(vec![n], (0..n).map(|_| dist.sample(r) as f32).collect()).expect("shape")
}

/// Total parameters of [`tiny_cnn`].
pub const TINY_CNN_PARAMETERS: usize = (8 * 3 * 9 + 8) + (16 * 8 * 9 + 16) + (10 * 16 * 8 * 8 + 10);

/// Seeded, He-initialised 10-class CNN on 3×32×32 inputs:
/// conv(3→8) relu pool conv(8→16) relu pool flatten dense(1024→10).
pub fn tiny_cnn(seed: u64) -> ModelGraph<f32> {
    let mut r = rng(seed);
    let conv = |r: &mut ChaCha8Rng, out: usize, inp: usize| {
        Layer::Conv2d(
            ConvSpec::new(he_tensor(r, vec![out, inp, 3, 3], inp * 9), small_bias(r, out), 1, 1).expect("valid conv"),
        )
    };
    let c1 = conv(&mut r, 8, 3);
    let c2 = conv(&mut r, 16, 8);
    let fc = Layer::Dense(
        DenseSpec::new(he_tensor(&mut r, vec![10, 1024], 1024), small_bias(&mut r, 10)).expect("valid dense"),
    );
    ModelGraph::new(
        [3, 32, 32],
        10,
        Some((0..10).map(|i| format!("class{i}")).collect()),
        vec![
            c1,
            Layer::ReLU,
            Layer::MaxPool2d { window: 2, stride: 2 },
            c2,
            Layer::ReLU,
            Layer::MaxPool2d { window: 2, stride: 2 },
            Layer::Flatten,
            fc,
        ],
    )
    .expect("valid tiny cnn")
}

/// Smooth colour gradients with a bright square and byte-quantised noise,
/// in `[0,1]`. Values are multiples of 1/255 so they survive a PPM round trip.
pub fn tiny_image(seed: u64, size: usize) -> Tensor<f32> {
    let mut r = rng(seed);
    let plane = size * size;
    let (x0, y0) = (r.random_range(0..size / 2), r.random_range(0..size / 2));
    Tensor::from_fn(vec![3, size, size], |i| {
        let (ch, p) = (i / plane, i % plane);
        let (row, col) = ((p / size) as f32, (p % size) as f32);
        let s = size as f32;
        let base = match ch {
            0 => col / s,
            1 => row / s,
            _ => 1.0 - (col + row) / (2.0 * s),
        };
        let square = (row as usize >= y0
            && (row as usize) < y0 + size / 3
            && col as usize >= x0
            && (col as usize) < x0 + size / 3) as u8 as f32
            * 0.4;
        let v = (0.6 * base + square + r.random_range(-0.05..0.05f32)).clamp(0.0, 1.0);
        (v * 255.0).round() / 255.0
    })
    .expect("image shape")
}

/// Model whose logits are `logits` regardless of the input.
pub fn constant_model(input_shape: [usize; 3], logits: &[f32]) -> ModelGraph<f32> {
    let c = input_shape[0];
    let k = logits.len();
    let conv = Layer::Conv2d(
        ConvSpec::new(
            Tensor::zeros(vec![1, c, 1, 1]).expect("shape"),
            Tensor::zeros(vec![1]).expect("shape"),
            1,
            0,
        )
        .expect("valid conv"),
    );
    ModelGraph::new(
        input_shape,
        k,
        None,
        vec![
            conv,
            Layer::ReLU,
            Layer::GlobalAvgPool,
            dense(vec![0.0; k], logits.to_vec()),
        ],
    )
    .expect("valid constant model")
}

/// Saliency map whose values are a seeded random permutation of
/// `0, 1/(n-1), …, 1`.
pub fn random_permutation_saliency(h: usize, w: usize, seed: u64) -> SaliencyMap<f32> {
    let n = h * w;
    let mut values: Vec<f32> = (0..n)
        .map(|i| if n > 1 { i as f32 / (n - 1) as f32 } else { 0.0 })
        .collect();
    values.shuffle(&mut rng(seed));
    SaliencyMap::from_values(Tensor::new(vec![1, h, w], values).expect("shape")).expect("values in [0,1]")
}

/// Indicator map of `region` (1 inside, 0 outside).
pub fn region_saliency(h: usize, w: usize, region: &BBox) -> SaliencyMap<f32> {
    let t = Tensor::from_fn(vec![1, h, w], |p| if region.contains(p / w, p % w) { 1.0 } else { 0.0 }).expect("shape");
    SaliencyMap::from_values(t).expect("values in [0,1]")
}
