//! Score-CAM saliency maps for small convolutional classifiers, with the
//! evaluation and sanity-check tooling around them.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! `*32` / `*64` aliases below name the common instantiations. Model and
//! image files are always stored as `f32`.

pub mod engine;
pub mod error;
pub mod eval;
pub mod io;
pub mod kernels;
pub mod model;
pub mod parallel;
pub mod saliency;
pub mod sanity;
pub mod scalar;
pub mod synthetic;
pub mod tensor;

pub use engine::{
    build_masks, combine, forward_with_capture, increase_of_confidence, masked_scores, scorecam, softmax_weights,
    ActivationCapture, Baseline, ChannelScoreVector, Explanation, ScoreCamConfig, TargetClass, UpsampleMode,
    DEFAULT_BATCH_SIZE,
};
pub use error::{Error, ErrorClass, Result};
pub use eval::{
    average_drop, average_increase, deletion_curve, energy_pointing, insertion_curve, mask_top_fraction,
    run_curves_eval, run_pointing_eval, run_recognition_eval, trapezoid_auc, CurveMode, CurveReport, CurvesReport,
    EvalConfig, PointingOutcome, PointingReport, RecognitionReport,
};
pub use io::{load_image, load_manifest, load_model, save_model, BBox, ImageRecord, PreprocessConfig};
pub use kernels::{ConvSpec, DenseSpec};
pub use model::{Layer, LayerKind, ModelGraph, ScoreMode};
pub use parallel::with_workers;
pub use saliency::{SaliencyMap, SaliencyMeta};
pub use sanity::{cascading_test, randomize_from, rank_correlation, RandomizationReport, RandomizationStage};
pub use scalar::Scalar;
pub use tensor::Tensor;

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type Model32 = ModelGraph<f32>;
pub type Model64 = ModelGraph<f64>;
pub type SaliencyMap32 = SaliencyMap<f32>;
pub type SaliencyMap64 = SaliencyMap<f64>;
pub type ScoreCamConfig32 = ScoreCamConfig<f32>;
pub type ScoreCamConfig64 = ScoreCamConfig<f64>;
pub type Explanation32 = Explanation<f32>;
pub type Explanation64 = Explanation<f64>;
