//! Segmentation metrics.

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Per-class and mean Dice over foreground classes (class 0 is background
/// and excluded).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DiceScores {
    /// Dice of class c at index c-1.
    pub per_class: Vec<f64>,
    pub mean: f64,
}

/// Dice overlap 2|P∩T| / (|P|+|T|) per foreground class. Two empty sets
/// count as perfect agreement (Dice 1): predicting absence correctly is
/// not an error.
pub fn dice(pred: &[u16], truth: &[u16], num_classes: usize) -> Result<DiceScores> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch {
            op: "dice",
            lhs: vec![pred.len()],
            rhs: vec![truth.len()],
        });
    }
    if num_classes < 2 {
        return Err(Error::Contract("dice needs at least one foreground class".into()));
    }
    if let Some(&bad) = pred.iter().chain(truth).find(|&&v| v as usize >= num_classes) {
        return Err(Error::Contract(format!(
            "label {bad} outside [0, {num_classes})"
        )));
    }
    let mut inter = vec![0usize; num_classes];
    let mut pred_count = vec![0usize; num_classes];
    let mut truth_count = vec![0usize; num_classes];
    for (&p, &t) in pred.iter().zip(truth) {
        pred_count[p as usize] += 1;
        truth_count[t as usize] += 1;
        if p == t {
            inter[p as usize] += 1;
        }
    }
    let per_class: Vec<f64> = (1..num_classes)
        .map(|c| {
            let denom = pred_count[c] + truth_count[c];
            if denom == 0 {
                1.0
            } else {
                2.0 * inter[c] as f64 / denom as f64
            }
        })
        .collect();
    let mean = per_class.iter().sum::<f64>() / per_class.len() as f64;
    Ok(DiceScores { per_class, mean })
}

/// Argmax over the class axis of (batch, classes, H, W) logits; ties go to
/// the lowest class index. Returns flat labels in (batch, H, W) order.
pub fn predict_labels(logits: &Tensor) -> Result<Vec<u16>> {
    if logits.rank() != 4 {
        return Err(Error::Contract(format!(
            "predict_labels expects rank-4 logits, got {:?}",
            logits.shape()
        )));
    }
    let (b, c, h, w) = (
        logits.shape()[0],
        logits.shape()[1],
        logits.shape()[2],
        logits.shape()[3],
    );
    let plane = h * w;
    let mut out = vec![0u16; b * plane];
    for bi in 0..b {
        for p in 0..plane {
            let mut best = 0usize;
            let mut best_v = logits.data()[bi * c * plane + p];
            for ci in 1..c {
                let v = logits.data()[(bi * c + ci) * plane + p];
                if v > best_v {
                    best_v = v;
                    best = ci;
                }
            }
            out[bi * plane + p] = best as u16;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction_is_all_ones() {
        let truth = vec![0u16, 1, 2, 1, 0, 2];
        let s = dice(&truth, &truth, 3).unwrap();
        assert_eq!(s.per_class, vec![1.0, 1.0]);
        assert_eq!(s.mean, 1.0);
    }

    #[test]
    fn disjoint_foregrounds_are_zero() {
        let pred = vec![1u16, 1, 0, 0];
        let truth = vec![0u16, 0, 1, 1];
        let s = dice(&pred, &truth, 2).unwrap();
        assert_eq!(s.per_class, vec![0.0]);
    }

    #[test]
    fn hand_counted_overlap() {
        // pred foreground {0,1}, truth foreground {0}: 2*1/(2+1)
        let pred = vec![1u16, 1, 0, 0];
        let truth = vec![1u16, 0, 0, 0];
        let s = dice(&pred, &truth, 2).unwrap();
        assert!((s.per_class[0] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn both_empty_class_counts_as_one() {
        // class 2 absent from both
        let pred = vec![1u16, 0];
        let truth = vec![1u16, 0];
        let s = dice(&pred, &truth, 3).unwrap();
        assert_eq!(s.per_class, vec![1.0, 1.0]);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(dice(&[0u16, 1], &[0u16], 2).is_err());
    }

    #[test]
    fn argmax_lowest_index_on_ties() {
        // batch 1, 2 classes, 1x2 image; logits equal on pixel 0
        let logits = Tensor::new(&[1, 2, 1, 2], vec![0.5, 0.1, 0.5, 0.9]).unwrap();
        let labels = predict_labels(&logits).unwrap();
        assert_eq!(labels, vec![0, 1]);
    }
}
