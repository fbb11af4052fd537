//! Score-CAM: channel-wise increase-of-confidence weighting of activation maps.
//!
//! For a target convolution layer with activation `A` (`K` channels), each
//! channel is upsampled to the input size and min-max normalised into a mask
//! `H_k`. The input is scored through the network once per mask,
//! `S_k = f_c(X ∘ H_k) - f_c(X_b)`, the scores are turned into weights with a
//! softmax, and the map is `ReLU(Σ_k α_k A^k)`, resized to the input and
//! rescaled to `[0, 1]`.
//!
//! Masked forward passes are independent and run on the current rayon pool
//! (see [`crate::parallel::with_workers`]); each chunk of `batch_size` masks
//! writes to its own output slots so the worker count never changes the
//! result.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels;
use crate::model::{LayerKind, ModelGraph, ScoreMode};
use crate::saliency::{SaliencyMap, SaliencyMeta};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const DEFAULT_BATCH_SIZE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TargetClass {
    /// Arg-max of the unmasked forward pass.
    #[default]
    Predicted,
    Index(usize),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Baseline<S> {
    /// All-zero tensor in preprocessed input space.
    #[default]
    Zero,
    Custom(Tensor<S>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpsampleMode {
    #[default]
    Bilinear,
    Nearest,
}

impl UpsampleMode {
    pub fn resize<S: Scalar>(self, t: &Tensor<S>, h: usize, w: usize) -> Result<Tensor<S>> {
        match self {
            UpsampleMode::Bilinear => kernels::bilinear_resize(t, h, w),
            UpsampleMode::Nearest => kernels::nearest_resize(t, h, w),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreCamConfig<S> {
    /// Conv2d layer to explain; `None` selects the last one.
    pub target_layer: Option<usize>,
    pub target_class: TargetClass,
    pub score_mode: ScoreMode,
    pub baseline: Baseline<S>,
    pub batch_size: usize,
    pub upsample: UpsampleMode,
}

impl<S> Default for ScoreCamConfig<S> {
    fn default() -> Self {
        ScoreCamConfig {
            target_layer: None,
            target_class: TargetClass::Predicted,
            score_mode: ScoreMode::PostSoftmax,
            baseline: Baseline::Zero,
            batch_size: DEFAULT_BATCH_SIZE,
            upsample: UpsampleMode::Bilinear,
        }
    }
}

impl<S: Scalar> ScoreCamConfig<S> {
    pub fn for_class(class: usize) -> Self {
        ScoreCamConfig {
            target_class: TargetClass::Index(class),
            ..Default::default()
        }
    }

    pub fn resolve_layer(&self, model: &ModelGraph<S>) -> Result<usize> {
        let layer = self.target_layer.unwrap_or_else(|| model.last_conv_layer());
        check_conv_layer(model, layer)?;
        Ok(layer)
    }

    pub fn baseline_tensor(&self, model: &ModelGraph<S>) -> Result<Tensor<S>> {
        match &self.baseline {
            Baseline::Zero => Tensor::zeros(model.input_shape().to_vec()),
            Baseline::Custom(t) if t.shape() == model.input_shape() => Ok(t.clone()),
            Baseline::Custom(t) => Err(Error::shape(format!(
                "baseline shape {:?} does not match model input {:?}",
                t.shape(),
                model.input_shape()
            ))),
        }
    }
}

/// Target-layer activation plus the unmasked network output.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationCapture<S> {
    /// `[K,h,w]`
    pub activation: Tensor<S>,
    /// Raw graph output for the unmasked input.
    pub scores: Tensor<S>,
}

/// Per-channel raw scores `S_k` and softmax weights `α_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelScoreVector<S> {
    pub raw: Vec<S>,
    pub weights: Vec<S>,
}

/// Result of a full Score-CAM run.
#[derive(Debug, Clone, PartialEq)]
pub struct Explanation<S> {
    pub map: SaliencyMap<S>,
    pub channel_scores: ChannelScoreVector<S>,
    pub capture: ActivationCapture<S>,
}

fn check_conv_layer<S: Scalar>(model: &ModelGraph<S>, layer: usize) -> Result<()> {
    let Some(l) = model.layers().get(layer) else {
        return Err(Error::LayerOutOfRange {
            index: layer,
            len: model.layers().len(),
        });
    };
    if l.kind() != LayerKind::Conv2d {
        return Err(Error::NotAConvLayer {
            index: layer,
            kind: l.kind().name(),
        });
    }
    Ok(())
}

pub fn forward_with_capture<S: Scalar>(
    model: &ModelGraph<S>,
    input: &Tensor<S>,
    layer: usize,
) -> Result<ActivationCapture<S>> {
    check_conv_layer(model, layer)?;
    let (activation, scores) = model.forward_capture(input, layer)?;
    Ok(ActivationCapture { activation, scores })
}

/// One `[1,H,W]` mask per activation channel: `normalize(upsample(A^k))`.
pub fn build_masks<S: Scalar>(
    activation: &Tensor<S>,
    input_h: usize,
    input_w: usize,
    mode: UpsampleMode,
) -> Result<Vec<Tensor<S>>> {
    let (k, _, _) = activation.chw()?;
    (0..k)
        .map(|c| {
            let up = mode.resize(&activation.channel(c)?, input_h, input_w)?;
            Ok(kernels::minmax_normalize(&up))
        })
        .collect()
}

fn check_mask_batch<S: Scalar>(input: &Tensor<S>, masks: &[Tensor<S>], batch_size: usize) -> Result<()> {
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch size must be positive".into()));
    }
    let (_, h, w) = input.chw()?;
    if let Some(bad) = masks.iter().find(|m| m.shape() != [1, h, w]) {
        return Err(Error::shape(format!(
            "mask shape {:?} does not match input resolution [1, {h}, {w}]",
            bad.shape()
        )));
    }
    Ok(())
}

/// `f_c(X ∘ H_k)` for every mask, evaluated in batches of `batch_size`.
pub fn masked_scores<S: Scalar>(
    model: &ModelGraph<S>,
    input: &Tensor<S>,
    masks: &[Tensor<S>],
    class: usize,
    mode: ScoreMode,
    batch_size: usize,
) -> Result<Vec<S>> {
    model.check_class(class)?;
    check_mask_batch(input, masks, batch_size)?;
    let chunks: Vec<Vec<S>> = masks
        .par_chunks(batch_size)
        .map(|chunk| {
            let masked = chunk
                .iter()
                .map(|m| kernels::hadamard(input, m))
                .collect::<Result<Vec<_>>>()?;
            let scores = model.scores_batch(&Tensor::stack(&masked)?, mode)?;
            let k = model.class_count();
            Ok(scores.data().chunks(k).map(|row| row[class]).collect())
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Raw channel scores `S_k = f_c(X ∘ H_k) - f_c(X_b)`.
#[allow(clippy::too_many_arguments)]
pub fn score_masked_batch<S: Scalar>(
    model: &ModelGraph<S>,
    input: &Tensor<S>,
    masks: &[Tensor<S>],
    class: usize,
    mode: ScoreMode,
    baseline: &Tensor<S>,
    batch_size: usize,
) -> Result<Vec<S>> {
    let base = model.class_score(baseline, class, mode)?;
    Ok(masked_scores(model, input, masks, class, mode, batch_size)?
        .into_iter()
        .map(|s| s - base)
        .collect())
}

pub fn softmax_weights<S: Scalar>(raw: &[S]) -> Vec<S> {
    if raw.is_empty() {
        return Vec::new();
    }
    let t = Tensor::new(vec![raw.len()], raw.to_vec()).expect("non-empty vector");
    kernels::softmax(&t).into_data()
}

/// `ReLU(Σ_k α_k A^k)` at activation resolution, bilinearly resized to the
/// input and min-max normalised.
pub fn combine<S: Scalar>(
    weights: &[S],
    activation: &Tensor<S>,
    input_h: usize,
    input_w: usize,
) -> Result<SaliencyMap<S>> {
    let (k, h, w) = activation.chw()?;
    if weights.len() != k {
        return Err(Error::shape(format!(
            "{} weights for {k} activation channels",
            weights.len()
        )));
    }
    let plane = h * w;
    let act = activation.data();
    let combined = Tensor::from_fn(vec![1, h, w], |p| {
        let s = (0..k).fold(0.0f64, |acc, c| acc + weights[c].acc() * act[c * plane + p].acc());
        S::from_acc(s.max(0.0))
    })?;
    let up = kernels::bilinear_resize(&combined, input_h, input_w)?;
    let values = kernels::minmax_normalize(&up);
    Ok(SaliencyMap::new(values, SaliencyMeta::default())?.with_combination(combined))
}

/// End-to-end Score-CAM for one `[C,H,W]` input.
pub fn scorecam<S: Scalar>(
    model: &ModelGraph<S>,
    input: &Tensor<S>,
    cfg: &ScoreCamConfig<S>,
) -> Result<Explanation<S>> {
    let layer = cfg.resolve_layer(model)?;
    let capture = forward_with_capture(model, input, layer)?;
    let class = match cfg.target_class {
        TargetClass::Predicted => kernels::argmax(&capture.scores),
        TargetClass::Index(c) => c,
    };
    model.check_class(class)?;
    let baseline = cfg.baseline_tensor(model)?;
    let (_, h, w) = input.chw()?;
    let masks = build_masks(&capture.activation, h, w, cfg.upsample)?;
    let raw = score_masked_batch(model, input, &masks, class, cfg.score_mode, &baseline, cfg.batch_size)?;
    let weights = softmax_weights(&raw);
    let mut map = combine(&weights, &capture.activation, h, w)?;
    map.meta = SaliencyMeta {
        model_id: String::new(),
        layer,
        class,
        score_mode: cfg.score_mode,
    };
    Ok(Explanation {
        map,
        channel_scores: ChannelScoreVector { raw, weights },
        capture,
    })
}

/// Score change from substituting entry `index` of `base` with the
/// corresponding entry of `probe`.
pub fn increase_of_confidence<S: Scalar>(
    model: &ModelGraph<S>,
    base: &Tensor<S>,
    probe: &Tensor<S>,
    index: usize,
    class: usize,
    mode: ScoreMode,
) -> Result<S> {
    if base.shape() != probe.shape() {
        return Err(Error::shape(format!(
            "base {:?} and probe {:?} differ in shape",
            base.shape(),
            probe.shape()
        )));
    }
    if index >= base.len() {
        return Err(Error::IndexOutOfRange { index, len: base.len() });
    }
    let mut substituted = base.clone();
    substituted.data_mut()[index] = probe.data()[index];
    Ok(model.class_score(&substituted, class, mode)? - model.class_score(base, class, mode)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{ConvSpec, DenseSpec};
    use crate::model::Layer;

    fn tiny() -> ModelGraph<f64> {
        let conv = ConvSpec::new(
            Tensor::from_fn(vec![3, 2, 3, 3], |i| ((i * 7) % 11) as f64 / 11.0 - 0.4).unwrap(),
            Tensor::vector(&[0.1, -0.2, 0.05]).unwrap(),
            1,
            1,
        )
        .unwrap();
        let dense = DenseSpec::new(
            Tensor::from_fn(vec![4, 48], |i| ((i * 5) % 13) as f64 / 13.0 - 0.5).unwrap(),
            Tensor::vector(&[0.0, 0.1, -0.1, 0.2]).unwrap(),
        )
        .unwrap();
        ModelGraph::new(
            [2, 4, 4],
            4,
            None,
            vec![Layer::Conv2d(conv), Layer::ReLU, Layer::Flatten, Layer::Dense(dense)],
        )
        .unwrap()
    }

    fn input() -> Tensor<f64> {
        Tensor::from_fn(vec![2, 4, 4], |i| ((i * 17) % 23) as f64 / 23.0).unwrap()
    }

    #[test]
    fn capture_errors() {
        let m = tiny();
        assert!(matches!(
            forward_with_capture(&m, &input(), 4),
            Err(Error::LayerOutOfRange { index: 4, .. })
        ));
        assert!(matches!(
            forward_with_capture(&m, &input(), 1),
            Err(Error::NotAConvLayer { index: 1, .. })
        ));
        let cap = forward_with_capture(&m, &input(), 0).unwrap();
        assert_eq!(cap.activation.shape(), m.layer_output_shape(0).unwrap());
        assert_eq!(cap.scores, m.forward(&input()).unwrap());
    }

    #[test]
    fn mask_edge_cases() {
        let mut act = Tensor::<f64>::zeros(vec![2, 2, 2]).unwrap();
        act.data_mut()[..4].fill(3.0);
        act.data_mut()[4..].copy_from_slice(&[0.0, 1.0, 0.25, 0.5]);
        let masks = build_masks(&act, 2, 2, UpsampleMode::Bilinear).unwrap();
        assert!(masks[0].data().iter().all(|&v| v == 0.0));
        assert_eq!(masks[1].data(), &[0.0, 1.0, 0.25, 0.5]);
    }

    #[test]
    fn masked_scores_trivial_cases() {
        let m = tiny();
        let x = input();
        let ones = Tensor::ones(vec![1, 4, 4]).unwrap();
        let zeros = Tensor::zeros(vec![1, 4, 4]).unwrap();
        for mode in [ScoreMode::PostSoftmax, ScoreMode::Logit] {
            let raw = score_masked_batch(&m, &x, std::slice::from_ref(&ones), 1, mode, &x, 4).unwrap();
            assert_eq!(raw, vec![0.0]);
            let zero_base = Tensor::zeros(vec![2, 4, 4]).unwrap();
            let raw = score_masked_batch(&m, &x, std::slice::from_ref(&zeros), 1, mode, &zero_base, 4).unwrap();
            assert_eq!(raw, vec![0.0]);
        }
        assert!(matches!(
            masked_scores(&m, &x, std::slice::from_ref(&ones), 9, ScoreMode::Logit, 1),
            Err(Error::ClassOutOfRange { class: 9, count: 4 })
        ));
        assert!(matches!(
            masked_scores(&m, &x, &[ones], 0, ScoreMode::Logit, 0),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn softmax_weight_cases() {
        let w = softmax_weights(&[0.3f64; 5]);
        assert!(w.iter().all(|&v| (v - 0.2).abs() < 1e-15));
        let raw = [1.0f64, 2.0, 3.0];
        let shifted: Vec<f64> = raw.iter().map(|v| v - 0.731).collect();
        let (a, b) = (softmax_weights(&raw), softmax_weights(&shifted));
        let denom: f64 = raw.iter().map(|v| v.exp()).sum();
        for i in 0..3 {
            assert!((a[i] - raw[i].exp() / denom).abs() < 1e-7);
            assert!((a[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn combine_single_channel_and_negative() {
        let act = Tensor::<f64>::new(vec![1, 2, 2], vec![0.0, 2.0, 1.0, 4.0]).unwrap();
        let map = combine(&[1.0], &act, 2, 2).unwrap();
        assert_eq!(map.values().data(), &[0.0, 0.5, 0.25, 1.0]);
        let neg = Tensor::<f64>::full(vec![2, 3, 3], -1.0).unwrap();
        let map = combine(&[0.5, 0.5], &neg, 6, 6).unwrap();
        assert!(map.is_all_zero());
        assert!(combine(&[1.0], &neg, 6, 6).is_err());
    }

    #[test]
    fn scorecam_is_pure_and_normalised() {
        let m = tiny();
        let cfg = ScoreCamConfig::default();
        let a = scorecam(&m, &input(), &cfg).unwrap();
        let b = scorecam(&m, &input(), &cfg).unwrap();
        assert_eq!(a, b);
        let total: f64 = a.channel_scores.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-6);
        assert_eq!(a.map.values().shape(), &[1, 4, 4]);
        assert_eq!(a.map.meta.class, kernels::argmax(&m.forward(&input()).unwrap()));
        let bad = ScoreCamConfig {
            target_class: TargetClass::Index(4),
            ..cfg.clone()
        };
        assert!(matches!(
            scorecam(&m, &input(), &bad),
            Err(Error::ClassOutOfRange { .. })
        ));
        let bad_base = ScoreCamConfig {
            baseline: Baseline::Custom(Tensor::zeros(vec![1, 4, 4]).unwrap()),
            ..cfg
        };
        assert!(scorecam(&m, &input(), &bad_base).is_err());
    }

    #[test]
    fn increase_of_confidence_cases() {
        let m = tiny();
        let x = input();
        for i in [0, 5, 31] {
            assert_eq!(increase_of_confidence(&m, &x, &x, i, 2, ScoreMode::Logit).unwrap(), 0.0);
        }
        assert!(matches!(
            increase_of_confidence(&m, &x, &x, 32, 2, ScoreMode::Logit),
            Err(Error::IndexOutOfRange { index: 32, len: 32 })
        ));
    }
}
