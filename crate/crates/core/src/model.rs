//! Layer graph and forward inference.

use crate::error::{Error, Result};
use crate::kernels::{self, ConvSpec, DenseSpec};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Conv2d,
    ReLU,
    MaxPool2d,
    GlobalAvgPool,
    Flatten,
    Dense,
    Softmax,
}

impl LayerKind {
    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Conv2d => "Conv2d",
            LayerKind::ReLU => "ReLU",
            LayerKind::MaxPool2d => "MaxPool2d",
            LayerKind::GlobalAvgPool => "GlobalAvgPool",
            LayerKind::Flatten => "Flatten",
            LayerKind::Dense => "Dense",
            LayerKind::Softmax => "Softmax",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<S> {
    Conv2d(ConvSpec<S>),
    ReLU,
    MaxPool2d { window: usize, stride: usize },
    GlobalAvgPool,
    Flatten,
    Dense(DenseSpec<S>),
    Softmax,
}

impl<S: Scalar> Layer<S> {
    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Conv2d(_) => LayerKind::Conv2d,
            Layer::ReLU => LayerKind::ReLU,
            Layer::MaxPool2d { .. } => LayerKind::MaxPool2d,
            Layer::GlobalAvgPool => LayerKind::GlobalAvgPool,
            Layer::Flatten => LayerKind::Flatten,
            Layer::Dense(_) => LayerKind::Dense,
            Layer::Softmax => LayerKind::Softmax,
        }
    }

    pub fn is_weighted(&self) -> bool {
        matches!(self, Layer::Conv2d(_) | Layer::Dense(_))
    }

    pub fn parameter_count(&self) -> usize {
        match self {
            Layer::Conv2d(spec) => spec.parameter_count(),
            Layer::Dense(spec) => spec.parameter_count(),
            _ => 0,
        }
    }

    /// Symbolic shape propagation.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let chw = || match *input {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(Error::shape(format!(
                "{} expects a [C,H,W] input, got {input:?}",
                self.kind().name()
            ))),
        };
        match self {
            Layer::Conv2d(spec) => {
                spec.validate()?;
                let (c, h, w) = chw()?;
                if c != spec.in_channels {
                    return Err(Error::shape(format!(
                        "Conv2d declares {} input channels but receives {c}",
                        spec.in_channels
                    )));
                }
                let (oh, ow) = spec.output_hw(h, w)?;
                Ok(vec![spec.out_channels, oh, ow])
            }
            Layer::ReLU => Ok(input.to_vec()),
            Layer::MaxPool2d { window, stride } => {
                let (c, h, w) = chw()?;
                let (oh, ow) = kernels::pool_output_hw(h, w, *window, *stride)?;
                Ok(vec![c, oh, ow])
            }
            Layer::GlobalAvgPool => Ok(vec![chw()?.0]),
            Layer::Flatten => Ok(vec![input.iter().product()]),
            Layer::Dense(spec) => {
                spec.validate()?;
                if input.len() != 1 || input[0] != spec.in_features() {
                    return Err(Error::shape(format!(
                        "Dense expects a [{}] vector, receives {input:?}",
                        spec.in_features()
                    )));
                }
                Ok(vec![spec.out_features()])
            }
            Layer::Softmax => {
                if input.len() != 1 {
                    return Err(Error::shape(format!("Softmax expects a vector, receives {input:?}")));
                }
                Ok(input.to_vec())
            }
        }
    }

    pub fn forward(&self, input: &Tensor<S>) -> Result<Tensor<S>> {
        match self {
            Layer::Conv2d(spec) => kernels::conv2d(input, spec),
            Layer::ReLU => Ok(kernels::relu(input)),
            Layer::MaxPool2d { window, stride } => kernels::maxpool2d(input, *window, *stride),
            Layer::GlobalAvgPool => kernels::global_avg_pool(input),
            Layer::Flatten => Ok(kernels::flatten(input)),
            Layer::Dense(spec) => kernels::dense(input, spec),
            Layer::Softmax => Ok(kernels::softmax(input)),
        }
    }

    fn cast<T: Scalar>(&self) -> Layer<T> {
        match self {
            Layer::Conv2d(s) => Layer::Conv2d(ConvSpec {
                out_channels: s.out_channels,
                in_channels: s.in_channels,
                kernel_h: s.kernel_h,
                kernel_w: s.kernel_w,
                stride: s.stride,
                padding: s.padding,
                weights: s.weights.cast(),
                bias: s.bias.cast(),
            }),
            Layer::ReLU => Layer::ReLU,
            Layer::MaxPool2d { window, stride } => Layer::MaxPool2d {
                window: *window,
                stride: *stride,
            },
            Layer::GlobalAvgPool => Layer::GlobalAvgPool,
            Layer::Flatten => Layer::Flatten,
            Layer::Dense(s) => Layer::Dense(DenseSpec {
                weights: s.weights.cast(),
                bias: s.bias.cast(),
            }),
            Layer::Softmax => Layer::Softmax,
        }
    }
}

/// Which class score a caller wants out of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreMode {
    /// Softmax probability.
    #[default]
    PostSoftmax,
    /// Pre-softmax class score.
    Logit,
}

/// Validated, immutable feed-forward network.
///
/// Logits are the output of the graph with a trailing `Softmax` layer (if
/// any) removed, so models exported with or without a final softmax yield
/// the same probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGraph<S> {
    input_shape: [usize; 3],
    class_count: usize,
    class_names: Option<Vec<String>>,
    layers: Vec<Layer<S>>,
    shapes: Vec<Vec<usize>>,
}

impl<S: Scalar> ModelGraph<S> {
    /// Validates that layers compose, that the output is a `class_count`
    /// vector, and that at least one convolution exists.
    pub fn new(
        input_shape: [usize; 3],
        class_count: usize,
        class_names: Option<Vec<String>>,
        layers: Vec<Layer<S>>,
    ) -> Result<Self> {
        if input_shape.contains(&0) {
            return Err(Error::shape(format!(
                "input shape {input_shape:?} has a zero dimension"
            )));
        }
        if class_count == 0 {
            return Err(Error::shape("class_count must be positive"));
        }
        if let Some(names) = &class_names {
            if names.len() != class_count {
                return Err(Error::shape(format!(
                    "{} class names for {class_count} classes",
                    names.len()
                )));
            }
        }
        let mut shapes = Vec::with_capacity(layers.len());
        let mut current = input_shape.to_vec();
        for (i, layer) in layers.iter().enumerate() {
            current = layer.output_shape(&current).map_err(|e| {
                let upstream = match i {
                    0 => "the model input".to_string(),
                    _ => format!("layer {} ({})", i - 1, layers[i - 1].kind().name()),
                };
                Error::shape(format!(
                    "layer {i} ({}) does not compose with {upstream}: {}",
                    layer.kind().name(),
                    match e {
                        Error::Shape(m) => m,
                        other => other.to_string(),
                    }
                ))
            })?;
            shapes.push(current.clone());
        }
        if current != [class_count] {
            return Err(Error::shape(format!(
                "final output shape {current:?} is not [{class_count}]"
            )));
        }
        if !layers.iter().any(|l| l.kind() == LayerKind::Conv2d) {
            return Err(Error::shape("model has no Conv2d layer"));
        }
        Ok(ModelGraph {
            input_shape,
            class_count,
            class_names,
            layers,
            shapes,
        })
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    pub fn layers(&self) -> &[Layer<S>] {
        &self.layers
    }

    /// Output shape of layer `index`.
    pub fn layer_output_shape(&self, index: usize) -> Result<&[usize]> {
        self.shapes.get(index).map(Vec::as_slice).ok_or(Error::LayerOutOfRange {
            index,
            len: self.layers.len(),
        })
    }

    pub fn layer_input_shape(&self, index: usize) -> Result<&[usize]> {
        match index {
            i if i >= self.layers.len() => Err(Error::LayerOutOfRange {
                index,
                len: self.layers.len(),
            }),
            0 => Ok(&self.input_shape),
            i => Ok(&self.shapes[i - 1]),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(Layer::parameter_count).sum()
    }

    pub fn conv_layer_indices(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.kind() == LayerKind::Conv2d)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn last_conv_layer(&self) -> usize {
        *self
            .conv_layer_indices()
            .last()
            .expect("validated graphs contain a Conv2d layer")
    }

    pub fn weighted_layer_indices(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_weighted())
            .map(|(i, _)| i)
            .collect()
    }

    /// Returns a copy with the layer list replaced, re-validated.
    pub fn with_layers(&self, layers: Vec<Layer<S>>) -> Result<Self> {
        Self::new(self.input_shape, self.class_count, self.class_names.clone(), layers)
    }

    pub fn cast<T: Scalar>(&self) -> ModelGraph<T> {
        ModelGraph {
            input_shape: self.input_shape,
            class_count: self.class_count,
            class_names: self.class_names.clone(),
            layers: self.layers.iter().map(Layer::cast).collect(),
            shapes: self.shapes.clone(),
        }
    }

    fn check_input(&self, input: &Tensor<S>) -> Result<()> {
        if input.shape() != self.input_shape {
            return Err(Error::shape(format!(
                "input shape {:?} does not match model input {:?}",
                input.shape(),
                self.input_shape
            )));
        }
        Ok(())
    }

    fn logit_layer_count(&self) -> usize {
        match self.layers.last() {
            Some(Layer::Softmax) => self.layers.len() - 1,
            _ => self.layers.len(),
        }
    }

    /// Raw graph output for a single `[C,H,W]` input.
    pub fn forward(&self, input: &Tensor<S>) -> Result<Tensor<S>> {
        self.check_input(input)?;
        self.run(input, self.layers.len())
    }

    /// Runs the graph for one input, also returning the output of `capture`.
    pub fn forward_capture(&self, input: &Tensor<S>, capture: usize) -> Result<(Tensor<S>, Tensor<S>)> {
        self.check_input(input)?;
        if capture >= self.layers.len() {
            return Err(Error::LayerOutOfRange {
                index: capture,
                len: self.layers.len(),
            });
        }
        let captured = self.run(input, capture + 1)?;
        let mut x = captured.clone();
        for layer in &self.layers[capture + 1..] {
            x = layer.forward(&x)?;
        }
        Ok((captured, x))
    }

    pub fn logits(&self, input: &Tensor<S>) -> Result<Tensor<S>> {
        self.check_input(input)?;
        self.run(input, self.logit_layer_count())
    }

    pub fn probabilities(&self, input: &Tensor<S>) -> Result<Tensor<S>> {
        Ok(kernels::softmax(&self.logits(input)?))
    }

    /// Class scores for one input under `mode`.
    pub fn scores(&self, input: &Tensor<S>, mode: ScoreMode) -> Result<Tensor<S>> {
        match mode {
            ScoreMode::PostSoftmax => self.probabilities(input),
            ScoreMode::Logit => self.logits(input),
        }
    }

    pub fn class_score(&self, input: &Tensor<S>, class: usize, mode: ScoreMode) -> Result<S> {
        self.check_class(class)?;
        Ok(self.scores(input, mode)?.data()[class])
    }

    pub fn check_class(&self, class: usize) -> Result<()> {
        if class >= self.class_count {
            return Err(Error::ClassOutOfRange {
                class,
                count: self.class_count,
            });
        }
        Ok(())
    }

    /// Scores for an `[N,C,H,W]` batch, returned as `[N,K]`. Each sample is
    /// evaluated independently.
    pub fn scores_batch(&self, batch: &Tensor<S>, mode: ScoreMode) -> Result<Tensor<S>> {
        if batch.rank() != 4 {
            return Err(Error::shape(format!(
                "batch must be [N,C,H,W], got {:?}",
                batch.shape()
            )));
        }
        let rows = batch
            .unstack()?
            .iter()
            .map(|x| self.scores(x, mode))
            .collect::<Result<Vec<_>>>()?;
        Tensor::stack(&rows)
    }

    fn run(&self, input: &Tensor<S>, upto: usize) -> Result<Tensor<S>> {
        let mut x = input.clone();
        for layer in &self.layers[..upto] {
            x = layer.forward(&x)?;
        }
        Ok(x)
    }
}
