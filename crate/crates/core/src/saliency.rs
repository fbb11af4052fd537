use crate::error::{Error, Result};
use crate::model::ScoreMode;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Provenance of a saliency map.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SaliencyMeta {
    pub model_id: String,
    pub layer: usize,
    pub class: usize,
    pub score_mode: ScoreMode,
}

/// Single-channel importance map at input resolution with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap<S> {
    values: Tensor<S>,
    combination: Option<Tensor<S>>,
    pub meta: SaliencyMeta,
}

impl<S: Scalar> SaliencyMap<S> {
    /// Wraps a `[1,H,W]` (or `[H,W]`) tensor whose values lie in `[0, 1]`.
    pub fn new(values: Tensor<S>, meta: SaliencyMeta) -> Result<Self> {
        let values = match *values.shape() {
            [1, _, _] => values,
            [h, w] => values.reshape(vec![1, h, w])?,
            _ => {
                return Err(Error::shape(format!(
                    "saliency map must be [1,H,W], got {:?}",
                    values.shape()
                )))
            }
        };
        if values.data().iter().any(|&v| !(v >= S::zero() && v <= S::one())) {
            return Err(Error::shape("saliency values must lie in [0, 1]"));
        }
        Ok(SaliencyMap {
            values,
            combination: None,
            meta,
        })
    }

    pub fn from_values(values: Tensor<S>) -> Result<Self> {
        Self::new(values, SaliencyMeta::default())
    }

    pub(crate) fn with_combination(mut self, combination: Tensor<S>) -> Self {
        self.combination = Some(combination);
        self
    }

    pub fn values(&self) -> &Tensor<S> {
        &self.values
    }

    /// `ReLU(Σ α_k A^k)` at activation resolution, before resizing and
    /// normalisation, when the map came from the engine.
    pub fn combination(&self) -> Option<&Tensor<S>> {
        self.combination.as_ref()
    }

    pub fn height(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.values.shape()[2]
    }

    pub fn is_all_zero(&self) -> bool {
        self.values.data().iter().all(|&v| v == S::zero())
    }
}
