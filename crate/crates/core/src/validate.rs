//! Agreement metrics between a predicted risk map and observed flood extent.

use crate::error::{Error, Result};
use crate::grid::{GeoGrid, Mask};

/// Ground-truth layers. The three masks must be pairwise disjoint: a cell is
/// observed flooded, observed dry, normal (permanent) water, or unlabeled.
/// Normal water never counts for or against a prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationMasks {
    flooded: Mask,
    dry: Mask,
    normal_water: Mask,
}

impl ValidationMasks {
    pub fn new(flooded: Mask, dry: Mask, normal_water: Mask) -> Result<Self> {
        flooded
            .geometry()
            .ensure_matches(&dry.geometry(), "validation masks")?;
        flooded
            .geometry()
            .ensure_matches(&normal_water.geometry(), "validation masks")?;
        for i in 0..flooded.cells().len() {
            let labels =
                flooded.cells()[i] as u8 + dry.cells()[i] as u8 + normal_water.cells()[i] as u8;
            if labels > 1 {
                let (r, c) = flooded.geometry().rc(i);
                return Err(Error::MaskOverlap(format!(
                    "cell ({r},{c}) carries multiple ground-truth labels"
                )));
            }
        }
        Ok(ValidationMasks {
            flooded,
            dry,
            normal_water,
        })
    }

    pub fn flooded(&self) -> &Mask {
        &self.flooded
    }

    pub fn dry(&self) -> &Mask {
        &self.dry
    }

    pub fn normal_water(&self) -> &Mask {
        &self.normal_water
    }
}

/// Which risk classes count as a flood prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationSet {
    /// Classes 3..=5 (normal risk and up).
    NormalAndAbove,
    /// Classes 4..=5 (high risk and up).
    HighAndAbove,
}

impl ValidationSet {
    pub const BOTH: [ValidationSet; 2] =
        [ValidationSet::NormalAndAbove, ValidationSet::HighAndAbove];

    /// 1-based tag used in reports.
    pub fn tag(self) -> u8 {
        match self {
            ValidationSet::NormalAndAbove => 1,
            ValidationSet::HighAndAbove => 2,
        }
    }

    pub fn lowest_positive_class(self) -> f64 {
        match self {
            ValidationSet::NormalAndAbove => 3.0,
            ValidationSet::HighAndAbove => 4.0,
        }
    }
}

/// Cells whose risk class clears the set's bar.
pub fn positive_mask(classes: &GeoGrid, set: ValidationSet) -> Mask {
    let floor = set.lowest_positive_class();
    let cells = classes
        .cells()
        .iter()
        .map(|&v| v != classes.nodata() && v >= floor)
        .collect();
    Mask::new(classes.geometry(), cells).expect("mask sized from geometry")
}

/// Percentage agreement between prediction and observation, after dropping
/// `excluded` cells from both:
///
/// * correct: share of the observed extent that was predicted,
/// * fit: intersection over union.
///
/// Errors when nothing remains of the observed extent.
pub fn correct_fit(predicted: &Mask, observed: &Mask, excluded: &Mask) -> Result<(f64, f64)> {
    predicted
        .geometry()
        .ensure_matches(&observed.geometry(), "correct_fit")?;
    predicted
        .geometry()
        .ensure_matches(&excluded.geometry(), "correct_fit")?;
    let mut inter = 0u64;
    let mut union = 0u64;
    let mut obs = 0u64;
    for i in 0..predicted.cells().len() {
        if excluded.cells()[i] {
            continue;
        }
        let p = predicted.cells()[i];
        let o = observed.cells()[i];
        inter += (p && o) as u64;
        union += (p || o) as u64;
        obs += o as u64;
    }
    if obs == 0 {
        return Err(Error::NoGroundTruth);
    }
    let correct = (inter as f64 / obs as f64) * 100.0;
    let fit = (inter as f64 / union as f64) * 100.0;
    Ok((correct, fit))
}

/// Confusion counts and derived scores. Undefined ratios (empty denominator)
/// come out 0.0 with their flag cleared so reports can say "undefined"
/// instead of printing a counterfeit zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionReport {
    pub true_positive: u64,
    pub false_positive: u64,
    pub false_negative: u64,
    pub true_negative: u64,
    pub precision: f64,
    pub precision_defined: bool,
    pub recall: f64,
    pub recall_defined: bool,
    pub f1: f64,
    pub f1_defined: bool,
}

/// Scores a prediction against the labeled cells. Only observed-flooded and
/// observed-dry cells participate; normal water and unlabeled cells are
/// skipped entirely.
pub fn confusion(predicted: &Mask, masks: &ValidationMasks) -> Result<ConfusionReport> {
    predicted
        .geometry()
        .ensure_matches(&masks.flooded.geometry(), "confusion")?;
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut fn_ = 0u64;
    let mut tn = 0u64;
    for i in 0..predicted.cells().len() {
        let p = predicted.cells()[i];
        if masks.flooded.cells()[i] {
            if p {
                tp += 1;
            } else {
                fn_ += 1;
            }
        } else if masks.dry.cells()[i] {
            if p {
                fp += 1;
            } else {
                tn += 1;
            }
        }
    }
    let precision_defined = tp + fp > 0;
    let precision = if precision_defined {
        tp as f64 / (tp + fp) as f64
    } else {
        0.0
    };
    let recall_defined = tp + fn_ > 0;
    let recall = if recall_defined {
        tp as f64 / (tp + fn_) as f64
    } else {
        0.0
    };
    let f1_defined = precision_defined && recall_defined && precision + recall > 0.0;
    let f1 = if f1_defined {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(ConfusionReport {
        true_positive: tp,
        false_positive: fp,
        false_negative: fn_,
        true_negative: tn,
        precision,
        precision_defined,
        recall,
        recall_defined,
        f1,
        f1_defined,
    })
}

/// Everything reported for one validation set.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationSetReport {
    pub set: ValidationSet,
    pub confusion: ConfusionReport,
    pub correct_pct: f64,
    pub fit_pct: f64,
}

/// Runs both validation sets against a classified risk grid.
pub fn validate_classes(
    classes: &GeoGrid,
    masks: &ValidationMasks,
) -> Result<Vec<ValidationSetReport>> {
    ValidationSet::BOTH
        .into_iter()
        .map(|set| {
            let predicted = positive_mask(classes, set);
            let conf = confusion(&predicted, masks)?;
            let (correct_pct, fit_pct) =
                correct_fit(&predicted, &masks.flooded, &masks.normal_water)?;
            Ok(ValidationSetReport {
                set,
                confusion: conf,
                correct_pct,
                fit_pct,
            })
        })
        .collect()
}
