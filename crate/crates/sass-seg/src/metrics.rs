//! Hard-mask evaluation: IoU, recall, accuracy, and the collapse diagnostic.
//!
//! IoU is reported two ways at the dataset level: `macro` (mean of per-image
//! IoU) and `micro` (one pooled confusion); displays default to macro.

use crate::error::{Error, Result};
use crate::losses::ProbMask;
use crate::thresholding::BinaryMask;

/// Integer confusion counts for one or more images.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HardConfusion {
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    pub true_neg: u64,
}

impl HardConfusion {
    pub fn from_masks(pred: &BinaryMask, target: &BinaryMask) -> Result<Self> {
        if pred.width != target.width || pred.height != target.height {
            return Err(Error::dims(format!(
                "prediction {}x{} vs target {}x{}",
                pred.width, pred.height, target.width, target.height
            )));
        }
        let mut conf = HardConfusion::default();
        for (&p, &t) in pred.data.iter().zip(&target.data) {
            match (p, t) {
                (1, 1) => conf.true_pos += 1,
                (1, 0) => conf.false_pos += 1,
                (0, 1) => conf.false_neg += 1,
                _ => conf.true_neg += 1,
            }
        }
        Ok(conf)
    }

    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }

    pub fn merge(&mut self, other: &HardConfusion) {
        self.true_pos += other.true_pos;
        self.false_pos += other.false_pos;
        self.false_neg += other.false_neg;
        self.true_neg += other.true_neg;
    }

    /// IoU of the foreground class; 1.0 when both masks are all background
    /// (vacuous agreement).
    pub fn iou(&self) -> f64 {
        let union = self.true_pos + self.false_pos + self.false_neg;
        if union == 0 {
            1.0
        } else {
            self.true_pos as f64 / union as f64
        }
    }

    /// Fraction of target foreground that is actually present.
    pub fn foreground_fraction(&self) -> f64 {
        (self.true_pos + self.false_neg) as f64 / self.total() as f64
    }
}

/// Degenerate-prediction diagnosis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Collapse {
    None,
    BackgroundCollapse,
    ForegroundCollapse,
}

impl std::fmt::Display for Collapse {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Collapse::None => "none",
            Collapse::BackgroundCollapse => "background",
            Collapse::ForegroundCollapse => "foreground",
        })
    }
}

/// Evaluation summary for one dataset split.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Mean of per-image IoU.
    pub iou_macro: f64,
    /// IoU of the pooled confusion.
    pub iou_micro: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub collapse: Collapse,
}

/// Hard-threshold a probability map: foreground where `p > cut`.
pub fn binarize(p: &ProbMask, cut: f64) -> Result<BinaryMask> {
    if !(cut > 0.0 && cut < 1.0) {
        return Err(Error::invalid(format!("cut must lie in (0,1), got {cut}")));
    }
    Ok(BinaryMask {
        width: p.width,
        height: p.height,
        data: p.data.iter().map(|&v| (v > cut) as u8).collect(),
    })
}

/// Intersection over union of two masks.
pub fn iou(pred: &BinaryMask, target: &BinaryMask) -> Result<f64> {
    Ok(HardConfusion::from_masks(pred, target)?.iou())
}

/// Recall = TP/(TP+FN) (1.0 when there are no positives to miss) and
/// accuracy = (TP+TN)/N.
pub fn recall_accuracy(conf: &HardConfusion) -> Result<(f64, f64)> {
    let total = conf.total();
    if total == 0 {
        return Err(Error::invalid("empty confusion"));
    }
    let positives = conf.true_pos + conf.false_neg;
    let recall = if positives == 0 {
        1.0
    } else {
        conf.true_pos as f64 / positives as f64
    };
    let accuracy = (conf.true_pos + conf.true_neg) as f64 / total as f64;
    Ok((recall, accuracy))
}

/// Tolerance for the foreground-collapse pattern match.
const COLLAPSE_TOL: f64 = 0.05;

/// Reproduce the "zero IoU but high accuracy" reasoning: an all-background
/// predictor scores iou = 0 with accuracy = 1 - fg_fraction, so near-zero
/// IoU together with accuracy at least 90% of that ceiling is flagged as
/// background collapse. The mirrored all-foreground pattern has both iou and
/// accuracy near fg_fraction.
pub fn collapse_diagnose(iou: f64, accuracy: f64, fg_fraction: f64) -> Collapse {
    if iou < 0.01 && accuracy >= 0.9 * (1.0 - fg_fraction) {
        Collapse::BackgroundCollapse
    } else if (accuracy - fg_fraction).abs() <= COLLAPSE_TOL
        && (iou - fg_fraction).abs() <= COLLAPSE_TOL
    {
        Collapse::ForegroundCollapse
    } else {
        Collapse::None
    }
}
