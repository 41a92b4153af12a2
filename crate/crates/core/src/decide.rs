//! Threshold-gated classification with Dummy rejection, per-class
//! precision/recall, and precision-recall sweeps for threshold selection.

use crate::dataio::{Label, NUM_CLASSES, TARGET_CLASSES};
use crate::error::{Error, Result};
use crate::nnet::SoftDecision;
use serde::{Deserialize, Serialize};

/// Per-target-class confidence thresholds. Dummy is never gated.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdPolicy {
    /// Thresholds indexed like [`TARGET_CLASSES`]: Forklift, Truck.
    pub thresholds: [f64; 2],
}

impl ThresholdPolicy {
    pub fn new(thresholds: [f64; 2]) -> Result<ThresholdPolicy> {
        for &t in &thresholds {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!("threshold {t} not in [0,1]")));
            }
        }
        Ok(ThresholdPolicy { thresholds })
    }

    pub fn zero() -> ThresholdPolicy {
        ThresholdPolicy {
            thresholds: [0.0, 0.0],
        }
    }

    pub fn uniform(t: f64) -> Result<ThresholdPolicy> {
        ThresholdPolicy::new([t, t])
    }

    pub fn threshold_for(&self, class: Label) -> Option<f64> {
        TARGET_CLASSES
            .iter()
            .position(|&c| c == class)
            .map(|i| self.thresholds[i])
    }
}

/// Argmax with threshold gating: if the winning class is a target class its
/// probability must be strictly greater than the class threshold, otherwise
/// the window is rejected into Dummy. Argmax ties break to the lowest index.
pub fn classify(probs: &SoftDecision, policy: &ThresholdPolicy) -> Label {
    let idx = probs.argmax();
    let label = Label::from_index(idx).unwrap_or(Label::Dummy);
    match policy.threshold_for(label) {
        None => Label::Dummy, // argmax is Dummy itself
        Some(_) if label == Label::Dummy => Label::Dummy,
        Some(t) => {
            if (probs.probs[idx] as f64) > t {
                label
            } else {
                Label::Dummy
            }
        }
    }
}

/// Precision and recall of one class over a prediction set. Both are defined
/// as 0 when their denominator is 0.
pub fn precision_recall(preds: &[Label], labels: &[Label], class: Label) -> (f64, f64) {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&p, &l) in preds.iter().zip(labels) {
        if p == class && l == class {
            tp += 1;
        } else if p == class {
            fp += 1;
        } else if l == class {
            fn_ += 1;
        }
    }
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    (precision, recall)
}

/// Per-class precision/recall plus the full confusion matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    /// (precision, recall) for Forklift and Truck, in [`TARGET_CLASSES`]
    /// order. Dummy is deliberately omitted.
    pub precision: [f64; 2],
    pub recall: [f64; 2],
    /// `confusion[truth][prediction]`, classes in `Label::ALL` order.
    pub confusion: [[usize; NUM_CLASSES]; NUM_CLASSES],
    /// Fraction of all evaluated windows classified as Dummy.
    pub dummy_rejection_rate: f64,
}

/// Applies a policy to soft decisions and scores against ground truth.
/// Ground-truth Dummy windows stay in the pool (they can create false
/// positives) but Dummy precision/recall is never reported.
pub fn evaluate(
    probs_set: &[SoftDecision],
    labels: &[Label],
    policy: &ThresholdPolicy,
) -> Result<EvalReport> {
    if probs_set.is_empty() {
        return Err(Error::EmptyDataset("no decisions to evaluate".into()));
    }
    if probs_set.len() != labels.len() {
        return Err(Error::Invariant(format!(
            "{} decisions but {} labels",
            probs_set.len(),
            labels.len()
        )));
    }
    let preds: Vec<Label> = probs_set.iter().map(|p| classify(p, policy)).collect();
    let mut confusion = [[0usize; NUM_CLASSES]; NUM_CLASSES];
    for (&p, &l) in preds.iter().zip(labels) {
        confusion[l.index()][p.index()] += 1;
    }
    let mut precision = [0.0; 2];
    let mut recall = [0.0; 2];
    for (i, &class) in TARGET_CLASSES.iter().enumerate() {
        let (p, r) = precision_recall(&preds, labels, class);
        precision[i] = p;
        recall[i] = r;
    }
    let dummies = preds.iter().filter(|&&p| p == Label::Dummy).count();
    Ok(EvalReport {
        precision,
        recall,
        confusion,
        dummy_rejection_rate: dummies as f64 / preds.len() as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassCurve {
    pub class: Label,
    pub points: Vec<PrPoint>,
}

/// Precision-recall curves over a shared threshold grid, one per target
/// class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrCurve {
    pub classes: Vec<ClassCurve>,
}

impl PrCurve {
    /// CSV rendering: `class,threshold,precision,recall`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,threshold,precision,recall\n");
        for curve in &self.classes {
            for p in &curve.points {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    curve.class.name(),
                    p.threshold,
                    p.precision,
                    p.recall
                ));
            }
        }
        out
    }
}

/// The default sweep grid: 0.00 to 1.00 in steps of 0.01 (101 points).
pub fn default_grid() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

/// For each grid threshold, applies a uniform policy to all target classes
/// and records per-class precision/recall.
pub fn sweep(probs_set: &[SoftDecision], labels: &[Label], grid: &[f64]) -> Result<PrCurve> {
    if probs_set.is_empty() {
        return Err(Error::EmptyDataset("no decisions to sweep".into()));
    }
    let mut classes: Vec<ClassCurve> = TARGET_CLASSES
        .iter()
        .map(|&class| ClassCurve {
            class,
            points: Vec::with_capacity(grid.len()),
        })
        .collect();
    for &t in grid {
        let policy = ThresholdPolicy::uniform(t)?;
        let preds: Vec<Label> = probs_set.iter().map(|p| classify(p, &policy)).collect();
        for curve in classes.iter_mut() {
            let (precision, recall) = precision_recall(&preds, labels, curve.class);
            curve.points.push(PrPoint {
                threshold: t,
                precision,
                recall,
            });
        }
    }
    Ok(PrCurve { classes })
}

/// Outcome of threshold selection: the policy plus the (precision, recall)
/// achieved at the chosen grid point for each target class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectedThresholds {
    pub policy: ThresholdPolicy,
    pub achieved: [PrPoint; 2],
    pub warnings: Vec<String>,
}

/// Per class: among grid points with recall >= `recall_floor`, picks the one
/// maximizing precision (ties: higher recall, then lower threshold). Falls
/// back to the global precision maximum with a warning when no point meets
/// the floor. `precision_target` only annotates the result: a warning is
/// recorded when the achieved precision falls short of it.
pub fn select_thresholds(
    curve: &PrCurve,
    precision_target: f64,
    recall_floor: f64,
) -> Result<SelectedThresholds> {
    let mut thresholds = [0.0f64; 2];
    let mut achieved = [PrPoint {
        threshold: 0.0,
        precision: 0.0,
        recall: 0.0,
    }; 2];
    let mut warnings = Vec::new();

    for (i, class_curve) in curve.classes.iter().enumerate() {
        if class_curve.points.is_empty() {
            return Err(Error::Invariant("empty PR curve".into()));
        }
        let better = |a: &PrPoint, b: &PrPoint| {
            // Is `a` preferable to `b`?
            (a.precision, a.recall, -a.threshold) > (b.precision, b.recall, -b.threshold)
        };
        let eligible: Vec<&PrPoint> = class_curve
            .points
            .iter()
            .filter(|p| p.recall >= recall_floor)
            .collect();
        let best = if eligible.is_empty() {
            warnings.push(format!(
                "{}: no grid point reaches recall >= {recall_floor}; falling back to global precision maximum",
                class_curve.class.name()
            ));
            class_curve
                .points
                .iter()
                .fold(None::<&PrPoint>, |acc, p| match acc {
                    Some(b) if !better(p, b) => Some(b),
                    _ => Some(p),
                })
                .expect("non-empty curve")
        } else {
            eligible
                .into_iter()
                .fold(None::<&PrPoint>, |acc, p| match acc {
                    Some(b) if !better(p, b) => Some(b),
                    _ => Some(p),
                })
                .expect("non-empty eligible set")
        };
        if best.precision < precision_target {
            warnings.push(format!(
                "{}: best precision {:.4} below target {precision_target}",
                class_curve.class.name(),
                best.precision
            ));
        }
        thresholds[i] = best.threshold;
        achieved[i] = *best;
    }

    Ok(SelectedThresholds {
        policy: ThresholdPolicy::new(thresholds)?,
        achieved,
        warnings,
    })
}
