//! Scoring detectors against annotated change windows, and the annotation
//! file format.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::CompositeLabel;

/// Annotation window length in frames (2 s at 25 Hz).
pub const DEFAULT_WINDOW: usize = 50;

/// Counts and rates in the column order Precision, Recall, TP, FP, FN.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionMatch {
    #[serde(rename = "Precision")]
    pub precision: f64,
    #[serde(rename = "Recall")]
    pub recall: f64,
    #[serde(rename = "TP")]
    pub tp: usize,
    #[serde(rename = "FP")]
    pub fp: usize,
    #[serde(rename = "FN")]
    pub fn_: usize,
}

impl DetectionMatch {
    /// Rates from counts; a rate with an empty denominator is 0.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        Self {
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            tp,
            fp,
            fn_,
        }
    }

    pub fn combine(self, other: DetectionMatch) -> DetectionMatch {
        Self::from_counts(self.tp + other.tp, self.fp + other.fp, self.fn_ + other.fn_)
    }
}

impl std::iter::Sum for DetectionMatch {
    fn sum<I: Iterator<Item = DetectionMatch>>(iter: I) -> Self {
        iter.fold(DetectionMatch::default(), DetectionMatch::combine)
    }
}

fn in_window(frame: i64, center: i64, window: usize) -> bool {
    let half = (window / 2) as i64;
    frame >= center - half && frame < center - half + window as i64
}

/// Greedy one-to-one matching in temporal order. A prediction is a true
/// positive when it falls in the `window`-frame window of a still unmatched
/// truth event (and, when the prediction carries a label, the labels
/// agree); the earliest such truth is consumed. Other predictions are false
/// positives and unmatched truths false negatives.
pub fn evaluate_detection(
    predicted: &[(i64, Option<CompositeLabel>)],
    truth: &[(i64, CompositeLabel)],
    window: usize,
) -> DetectionMatch {
    let mut preds = predicted.to_vec();
    preds.sort_by_key(|p| p.0);
    let mut order: Vec<usize> = (0..truth.len()).collect();
    order.sort_by_key(|&i| truth[i].0);
    let mut matched = vec![false; truth.len()];
    let (mut tp, mut fp) = (0, 0);
    for (frame, label) in preds {
        let hit = order.iter().copied().find(|&i| {
            !matched[i]
                && in_window(frame, truth[i].0, window)
                && label.is_none_or(|l| l == truth[i].1)
        });
        match hit {
            Some(i) => {
                matched[i] = true;
                tp += 1;
            }
            None => fp += 1,
        }
    }
    let fn_ = matched.iter().filter(|m| !**m).count();
    DetectionMatch::from_counts(tp, fp, fn_)
}

/// One annotated behavior change.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub recording_id: String,
    pub vehicle_id: i64,
    pub window_center_frame: i64,
    pub composite_label: String,
}

impl Annotation {
    pub fn label(&self) -> Result<CompositeLabel> {
        self.composite_label.parse()
    }
}

pub fn write_annotations<W: Write>(out: W, annotations: &[Annotation]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for a in annotations {
        w.serialize(a)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_annotations<R: Read>(input: R) -> Result<Vec<Annotation>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize() {
        let a: Annotation = row.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        a.label()?;
        out.push(a);
    }
    Ok(out)
}
