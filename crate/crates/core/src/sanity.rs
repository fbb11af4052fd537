//! Cascading model-parameter randomization check.
//!
//! Weighted layers are re-initialised one at a time from the output end
//! inward and the explanation is recomputed after each step. A method whose
//! maps barely change is insensitive to the model and fails the check.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::engine::{scorecam, ScoreCamConfig, TargetClass};
use crate::error::{Error, Result};
use crate::kernels::{ConvSpec, DenseSpec};
use crate::model::{Layer, ModelGraph};
use crate::saliency::SaliencyMap;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandomizationStage {
    /// Graph index of the first randomized layer; the layer count for the
    /// unmodified model.
    pub randomized_from: usize,
    /// Graph indices of every randomized layer.
    pub randomized_layers: Vec<usize>,
    pub similarity: f64,
    pub l2_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandomizationReport {
    pub seed: u64,
    pub layer: usize,
    pub class: usize,
    pub stages: Vec<RandomizationStage>,
}

/// Population standard deviation.
pub fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

fn layer_rng(seed: u64, layer: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(layer as u64 + 1);
    rng
}

fn resample<S: Scalar>(t: &Tensor<S>, dist: &Normal<f64>, rng: &mut ChaCha8Rng) -> Tensor<S> {
    t.map(|_| S::from_acc(dist.sample(rng)))
}

fn randomize_layer<S: Scalar>(layer: &Layer<S>, seed: u64, index: usize) -> Layer<S> {
    let (weights, bias) = match layer {
        Layer::Conv2d(s) => (&s.weights, &s.bias),
        Layer::Dense(s) => (&s.weights, &s.bias),
        other => return other.clone(),
    };
    let w: Vec<f64> = weights.data().iter().map(|x| x.acc()).collect();
    let dist = Normal::new(0.0, std_dev(&w)).expect("finite std");
    let mut rng = layer_rng(seed, index);
    let (weights, bias) = (resample(weights, &dist, &mut rng), resample(bias, &dist, &mut rng));
    match layer {
        Layer::Conv2d(s) => Layer::Conv2d(ConvSpec {
            weights,
            bias,
            ..s.clone()
        }),
        Layer::Dense(_) => Layer::Dense(DenseSpec { weights, bias }),
        _ => unreachable!(),
    }
}

/// Copy of `model` in which every weighted layer with graph index
/// `>= from_layer` has weights and biases drawn from `N(0, σ²)`, σ being the
/// empirical std of that layer's original weights. Each layer draws from
/// its own seeded stream, so `randomize_from(m, i)` agrees with
/// `randomize_from(m, j)` on the layers both randomize.
pub fn randomize_from<S: Scalar>(model: &ModelGraph<S>, from_layer: usize, seed: u64) -> Result<ModelGraph<S>> {
    let len = model.layers().len();
    if from_layer > len {
        return Err(Error::LayerOutOfRange { index: from_layer, len });
    }
    let layers = model
        .layers()
        .iter()
        .enumerate()
        .map(|(i, l)| {
            if i >= from_layer {
                randomize_layer(l, seed, i)
            } else {
                l.clone()
            }
        })
        .collect();
    model.with_layers(layers)
}

/// Average 1-based ranks, ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation of two equally sized maps.
///
/// When either side has no rank variation (e.g. an all-zero map) the
/// correlation is undefined; it is reported as 1 if the two maps are equal
/// and 0 otherwise.
pub fn rank_correlation<S: Scalar>(a: &SaliencyMap<S>, b: &SaliencyMap<S>) -> Result<f64> {
    if a.values().shape() != b.values().shape() {
        return Err(Error::shape(format!(
            "cannot correlate {:?} with {:?}",
            a.values().shape(),
            b.values().shape()
        )));
    }
    let xa: Vec<f64> = a.values().data().iter().map(|v| v.acc()).collect();
    let xb: Vec<f64> = b.values().data().iter().map(|v| v.acc()).collect();
    let (ra, rb) = (average_ranks(&xa), average_ranks(&xb));
    if ra == rb {
        return Ok(1.0);
    }
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Ok(0.0);
    }
    Ok((cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0))
}

pub fn l2_distance<S: Scalar>(a: &SaliencyMap<S>, b: &SaliencyMap<S>) -> f64 {
    a.values()
        .data()
        .iter()
        .zip(b.values().data())
        .map(|(x, y)| (x.acc() - y.acc()).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Recomputes the explanation after cumulatively randomizing weighted layers
/// from the output end inward. Layer and class are resolved once on the
/// original model and held fixed.
pub fn cascading_test<S: Scalar>(
    model: &ModelGraph<S>,
    input: &Tensor<S>,
    cfg: &ScoreCamConfig<S>,
    seed: u64,
) -> Result<RandomizationReport> {
    let original = scorecam(model, input, cfg)?;
    let layer = original.map.meta.layer;
    let pinned = ScoreCamConfig {
        target_layer: Some(layer),
        target_class: TargetClass::Index(original.map.meta.class),
        ..cfg.clone()
    };
    let reference = &original.map;
    let mut stages = vec![RandomizationStage {
        randomized_from: model.layers().len(),
        randomized_layers: Vec::new(),
        similarity: rank_correlation(reference, reference)?,
        l2_distance: l2_distance(reference, reference),
    }];
    let weighted = model.weighted_layer_indices();
    for (n, &from) in weighted.iter().rev().enumerate() {
        let randomized = randomize_from(model, from, seed)?;
        let map = scorecam(&randomized, input, &pinned)?.map;
        stages.push(RandomizationStage {
            randomized_from: from,
            randomized_layers: weighted[weighted.len() - 1 - n..].to_vec(),
            similarity: rank_correlation(reference, &map)?,
            l2_distance: l2_distance(reference, &map),
        });
    }
    Ok(RandomizationReport {
        seed,
        layer,
        class: original.map.meta.class,
        stages,
    })
}
