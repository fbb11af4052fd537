//! Saliency evaluation: recognition fidelity (average drop / increase),
//! deletion and insertion curves, and the energy-based pointing game.
//!
//! Perturbations are applied to the preprocessed input tensor. Pixel
//! importance order is descending saliency with ties broken by row-major
//! index. Per-image work runs in parallel; reports keep manifest order.

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{scorecam, ScoreCamConfig, TargetClass};
use crate::error::{Error, Result};
use crate::io::{BBox, ImageRecord, PreprocessConfig};
use crate::kernels;
use crate::model::{ModelGraph, ScoreMode};
use crate::saliency::SaliencyMap;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Number of 1% steps in a deletion/insertion curve.
pub const CURVE_STEPS: usize = 100;

/// Largest bbox area, as a fraction of the image, kept by the pointing game.
pub const POINTING_MAX_BOX_FRACTION: f64 = 0.5;

pub const DEFAULT_KEEP_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveMode {
    Deletion,
    Insertion,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveReport {
    pub mode: CurveMode,
    pub fractions: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub auc: f64,
}

impl CurveReport {
    /// `fraction,probability` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fraction,probability\n");
        for (f, p) in self.fractions.iter().zip(&self.probabilities) {
            out.push_str(&format!("{f:.2},{p}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecognitionImage {
    pub id: String,
    pub class: usize,
    /// Class probability on the full input.
    pub full_score: f64,
    /// Class probability on the saliency-masked input.
    pub masked_score: f64,
    pub drop_pct: f64,
    pub increased: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecognitionReport {
    pub average_drop_pct: f64,
    pub average_increase_pct: f64,
    pub keep_fraction: f64,
    pub per_image: Vec<RecognitionImage>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageCurves {
    pub id: String,
    pub class: usize,
    pub deletion: CurveReport,
    pub insertion: CurveReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvesReport {
    pub mean_deletion_auc: f64,
    pub mean_insertion_auc: f64,
    pub per_image: Vec<ImageCurves>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PointingOutcome {
    Scored {
        proportion: f64,
    },
    /// Bounding box covers more than half the image.
    Oversized,
    /// All-zero saliency map.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointingImage {
    pub id: String,
    pub class: usize,
    #[serde(flatten)]
    pub outcome: PointingOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointingReport {
    pub mean_proportion: f64,
    pub scored: usize,
    pub skipped_oversized: usize,
    pub degenerate: usize,
    pub per_image: Vec<PointingImage>,
}

/// Everything the dataset-level evaluations need besides the model.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig<S> {
    /// `target_class` is overridden per image.
    pub scorecam: ScoreCamConfig<S>,
    pub preprocess: PreprocessConfig,
    pub keep_fraction: f64,
}

impl<S: Scalar> EvalConfig<S> {
    pub fn new(scorecam: ScoreCamConfig<S>, preprocess: PreprocessConfig) -> Self {
        EvalConfig {
            scorecam,
            preprocess,
            keep_fraction: DEFAULT_KEEP_FRACTION,
        }
    }
}

/// Pixel indices from most to least salient; equal values keep row-major order.
pub fn salience_order<S: Scalar>(saliency: &SaliencyMap<S>) -> Vec<usize> {
    let v = saliency.values().data();
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].partial_cmp(&v[a]).expect("saliency values are finite"));
    order
}

/// `ceil(fraction · total)`, treating products within rounding noise of an
/// integer as that integer.
pub fn fraction_count(fraction: f64, total: usize) -> usize {
    let x = fraction * total as f64;
    let r = x.round();
    let n = if (x - r).abs() <= 1e-9 * (total.max(1) as f64) {
        r
    } else {
        x.ceil()
    };
    (n.max(0.0) as usize).min(total)
}

fn check_resolution<S: Scalar>(input: &Tensor<S>, saliency: &SaliencyMap<S>) -> Result<(usize, usize, usize)> {
    let (c, h, w) = input.chw()?;
    if (saliency.height(), saliency.width()) != (h, w) {
        return Err(Error::shape(format!(
            "saliency {}x{} does not match input {h}x{w}",
            saliency.height(),
            saliency.width()
        )));
    }
    Ok((c, h, w))
}

/// Every channel of `pixels` set from `src` (or zero when `src` is `None`).
fn set_pixels<S: Scalar>(x: &mut Tensor<S>, src: Option<&Tensor<S>>, pixels: &[usize], plane: usize) {
    let channels = x.len() / plane;
    let data = x.data_mut();
    for ch in 0..channels {
        for &p in pixels {
            data[ch * plane + p] = src.map_or(S::zero(), |s| s.data()[ch * plane + p]);
        }
    }
}

/// Keeps the top `⌈keep_fraction · H·W⌉` salient pixels (all channels) and
/// zeroes the rest.
pub fn mask_top_fraction<S: Scalar>(
    input: &Tensor<S>,
    saliency: &SaliencyMap<S>,
    keep_fraction: f64,
) -> Result<Tensor<S>> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "keep fraction {keep_fraction} outside (0, 1]"
        )));
    }
    let (_, h, w) = check_resolution(input, saliency)?;
    let order = salience_order(saliency);
    let keep = fraction_count(keep_fraction, h * w);
    let mut out = input.clone();
    set_pixels(&mut out, None, &order[keep..], h * w);
    Ok(out)
}

/// Mean over images of `max(0, Y - O) / Y`, in percent.
pub fn average_drop(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for &(y, o) in pairs {
        if y.is_nan() || y <= 0.0 {
            return Err(Error::NonpositiveScore(y));
        }
        total += (y - o).max(0.0) / y;
    }
    Ok(total / pairs.len() as f64 * 100.0)
}

/// Percentage of images whose masked score exceeds the full score.
pub fn average_increase(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let count = pairs.iter().filter(|(y, o)| o > y).count();
    Ok(100.0 * count as f64 / pairs.len() as f64)
}

/// Trapezoid rule over `(x, y)` samples.
pub fn trapezoid_auc(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (y[0] + y[1]) * (x[1] - x[0]))
        .sum()
}

fn curve<S: Scalar>(
    model: &ModelGraph<S>,
    input: &Tensor<S>,
    saliency: &SaliencyMap<S>,
    class: usize,
    mode: CurveMode,
) -> Result<CurveReport> {
    model.check_class(class)?;
    let (_, h, w) = check_resolution(input, saliency)?;
    let plane = h * w;
    let order = salience_order(saliency);
    let probabilities = (0..=CURVE_STEPS)
        .into_par_iter()
        .map(|step| {
            let n = (step * plane).div_ceil(CURVE_STEPS);
            let x = match mode {
                CurveMode::Deletion => {
                    let mut x = input.clone();
                    set_pixels(&mut x, None, &order[..n], plane);
                    x
                }
                CurveMode::Insertion => {
                    let mut x = Tensor::zeros(input.shape().to_vec())?;
                    set_pixels(&mut x, Some(input), &order[..n], plane);
                    x
                }
            };
            Ok(model.class_score(&x, class, ScoreMode::PostSoftmax)?.acc())
        })
        .collect::<Result<Vec<f64>>>()?;
    let fractions: Vec<f64> = (0..=CURVE_STEPS).map(|i| i as f64 / CURVE_STEPS as f64).collect();
    let auc = trapezoid_auc(&fractions, &probabilities);
    Ok(CurveReport {
        mode,
        fractions,
        probabilities,
        auc,
    })
}

/// Class probability as the most salient pixels are progressively zeroed.
pub fn deletion_curve<S: Scalar>(
    model: &ModelGraph<S>,
    input: &Tensor<S>,
    saliency: &SaliencyMap<S>,
    class: usize,
) -> Result<CurveReport> {
    curve(model, input, saliency, class, CurveMode::Deletion)
}

/// Class probability as the most salient pixels are restored onto a zero canvas.
pub fn insertion_curve<S: Scalar>(
    model: &ModelGraph<S>,
    input: &Tensor<S>,
    saliency: &SaliencyMap<S>,
    class: usize,
) -> Result<CurveReport> {
    curve(model, input, saliency, class, CurveMode::Insertion)
}

/// Fraction of saliency mass inside `bbox`.
pub fn energy_pointing<S: Scalar>(saliency: &SaliencyMap<S>, bbox: &BBox) -> Result<f64> {
    let (h, w) = (saliency.height(), saliency.width());
    if !bbox.fits(h, w) {
        return Err(Error::shape(format!("bbox {bbox:?} outside the {w}x{h} map")));
    }
    let v = saliency.values().data();
    let (mut inside, mut outside) = (0.0f64, 0.0f64);
    for row in 0..h {
        for col in 0..w {
            let x = v[row * w + col].acc();
            if bbox.contains(row, col) {
                inside += x;
            } else {
                outside += x;
            }
        }
    }
    if inside + outside == 0.0 {
        return Err(Error::DegenerateMap);
    }
    Ok(inside / (inside + outside))
}

fn prepare<S: Scalar>(record: &ImageRecord, cfg: &EvalConfig<S>) -> Result<Tensor<S>> {
    cfg.preprocess.apply(&record.pixels.cast::<S>())
}

fn require_label(record: &ImageRecord) -> Result<usize> {
    record.label.ok_or_else(|| Error::MissingField {
        id: record.id.clone(),
        field: "label",
    })
}

fn explain<S: Scalar>(
    model: &ModelGraph<S>,
    input: &Tensor<S>,
    class: usize,
    cfg: &EvalConfig<S>,
) -> Result<SaliencyMap<S>> {
    let sc = ScoreCamConfig {
        target_class: TargetClass::Index(class),
        ..cfg.scorecam.clone()
    };
    Ok(scorecam(model, input, &sc)?.map)
}

/// Average drop / increase with the top `keep_fraction` of salient pixels kept.
pub fn run_recognition_eval<S: Scalar>(
    model: &ModelGraph<S>,
    records: &[ImageRecord],
    cfg: &EvalConfig<S>,
) -> Result<RecognitionReport> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let per_image = records
        .par_iter()
        .map(|record| {
            let class = require_label(record)?;
            let input = prepare(record, cfg)?;
            let full = model.class_score(&input, class, ScoreMode::PostSoftmax)?.acc();
            let map = explain(model, &input, class, cfg)?;
            let masked_input = mask_top_fraction(&input, &map, cfg.keep_fraction)?;
            let masked = model.class_score(&masked_input, class, ScoreMode::PostSoftmax)?.acc();
            Ok(RecognitionImage {
                id: record.id.clone(),
                class,
                full_score: full,
                masked_score: masked,
                drop_pct: average_drop(&[(full, masked)])?,
                increased: masked > full,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(f64, f64)> = per_image.iter().map(|r| (r.full_score, r.masked_score)).collect();
    Ok(RecognitionReport {
        average_drop_pct: average_drop(&pairs)?,
        average_increase_pct: average_increase(&pairs)?,
        keep_fraction: cfg.keep_fraction,
        per_image,
    })
}

/// Deletion and insertion curves per image. Uses the record label when
/// present, otherwise the predicted class.
pub fn run_curves_eval<S: Scalar>(
    model: &ModelGraph<S>,
    records: &[ImageRecord],
    cfg: &EvalConfig<S>,
) -> Result<CurvesReport> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let per_image = records
        .par_iter()
        .map(|record| {
            let input = prepare(record, cfg)?;
            let class = match record.label {
                Some(c) => c,
                None => kernels::argmax(&model.probabilities(&input)?),
            };
            let map = explain(model, &input, class, cfg)?;
            Ok(ImageCurves {
                id: record.id.clone(),
                class,
                deletion: deletion_curve(model, &input, &map, class)?,
                insertion: insertion_curve(model, &input, &map, class)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = per_image.len() as f64;
    Ok(CurvesReport {
        mean_deletion_auc: per_image.iter().map(|c| c.deletion.auc).sum::<f64>() / n,
        mean_insertion_auc: per_image.iter().map(|c| c.insertion.auc).sum::<f64>() / n,
        per_image,
    })
}

/// Energy-based pointing game over records with bounding boxes. Boxes are in
/// original image pixels, so the map is resized back to the image before
/// scoring. Images whose box exceeds half the image are skipped; all-zero
/// maps are counted and excluded from the mean.
pub fn run_pointing_eval<S: Scalar>(
    model: &ModelGraph<S>,
    records: &[ImageRecord],
    cfg: &EvalConfig<S>,
) -> Result<PointingReport> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let per_image = records
        .par_iter()
        .map(|record| {
            let class = require_label(record)?;
            let bbox = record.bbox.ok_or_else(|| Error::MissingField {
                id: record.id.clone(),
                field: "bbox",
            })?;
            let (_, h, w) = record.pixels.chw()?;
            let outcome = if bbox.area() as f64 > POINTING_MAX_BOX_FRACTION * (h * w) as f64 {
                PointingOutcome::Oversized
            } else {
                let input = prepare(record, cfg)?;
                let map = explain(model, &input, class, cfg)?;
                let resized = kernels::bilinear_resize(map.values(), h, w)?.map(|v| v.max(S::zero()).min(S::one()));
                match energy_pointing(&SaliencyMap::from_values(resized)?, &bbox) {
                    Ok(proportion) => PointingOutcome::Scored { proportion },
                    Err(Error::DegenerateMap) => PointingOutcome::Degenerate,
                    Err(e) => return Err(e),
                }
            };
            Ok(PointingImage {
                id: record.id.clone(),
                class,
                outcome,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let scores: Vec<f64> = per_image
        .iter()
        .filter_map(|p| match p.outcome {
            PointingOutcome::Scored { proportion } => Some(proportion),
            _ => None,
        })
        .collect();
    let skipped = per_image
        .iter()
        .filter(|p| p.outcome == PointingOutcome::Oversized)
        .count();
    let degenerate = per_image
        .iter()
        .filter(|p| p.outcome == PointingOutcome::Degenerate)
        .count();
    if scores.is_empty() {
        return Err(Error::NoEligibleImages { skipped, degenerate });
    }
    Ok(PointingReport {
        mean_proportion: scores.iter().sum::<f64>() / scores.len() as f64,
        scored: scores.len(),
        skipped_oversized: skipped,
        degenerate,
        per_image,
    })
}
