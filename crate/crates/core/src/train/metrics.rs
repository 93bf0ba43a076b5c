use std::fmt::Write;

use super::TrainError;
use crate::classes::{CLASS_NAMES, NUM_CLASSES};

/// `m[g][p]` counts scored pixels with ground truth `g` predicted as `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub m: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    /// Accumulates a label map pair; ground-truth pixels equal to `ignore`
    /// are skipped.
    pub fn add(&mut self, truth: &[u8], pred: &[u8], ignore: u8) -> Result<(), TrainError> {
        if truth.len() != pred.len() {
            return Err(TrainError::Shape(format!(
                "{} ground-truth pixels vs {} predictions",
                truth.len(),
                pred.len()
            )));
        }
        for (&g, &p) in truth.iter().zip(pred) {
            if g == ignore {
                continue;
            }
            if g as usize >= NUM_CLASSES || p as usize >= NUM_CLASSES {
                return Err(TrainError::Shape(format!("label pair ({g}, {p}) outside the class range")));
            }
            self.m[g as usize][p as usize] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &Self) {
        for g in 0..NUM_CLASSES {
            for p in 0..NUM_CLASSES {
                self.m[g][p] += other.m[g][p];
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.m.iter().flatten().sum()
    }

    pub fn truth_count(&self, c: usize) -> u64 {
        self.m[c].iter().sum()
    }

    pub fn pred_count(&self, c: usize) -> u64 {
        self.m.iter().map(|row| row[c]).sum()
    }

    /// `(|G ∩ P|, |G ∪ P|)` for class `c`.
    pub fn intersection_union(&self, c: usize) -> (u64, u64) {
        let i = self.m[c][c];
        (i, self.truth_count(c) + self.pred_count(c) - i)
    }

    /// `None` when the class is absent from both truth and prediction.
    pub fn iou(&self, c: usize) -> Option<f64> {
        let (i, u) = self.intersection_union(c);
        (u > 0).then(|| i as f64 / u as f64)
    }

    /// Classes that occur in the ground truth.
    pub fn present_classes(&self) -> Vec<usize> {
        (0..NUM_CLASSES).filter(|&c| self.truth_count(c) > 0).collect()
    }

    /// Mean IoU over classes present in the ground truth; `None` if nothing
    /// was scored.
    pub fn miou(&self) -> Option<f64> {
        let present = self.present_classes();
        if present.is_empty() {
            return None;
        }
        let sum: f64 = present.iter().map(|&c| self.iou(c).expect("present class has a union")).sum();
        Some(sum / present.len() as f64)
    }

    pub fn pixel_accuracy(&self) -> Option<f64> {
        let t = self.total();
        (t > 0).then(|| (0..NUM_CLASSES).map(|c| self.m[c][c]).sum::<u64>() as f64 / t as f64)
    }

    /// Per-class IoU table followed by an `mIoU` line.
    pub fn report(&self) -> String {
        let mut s = String::from("class\tIoU\tgt_pixels\tpred_pixels\n");
        for c in 0..NUM_CLASSES {
            let iou = self.iou(c).map_or("n/a".to_string(), |v| format!("{:.4}", v));
            let _ = writeln!(s, "{}\t{}\t{}\t{}", CLASS_NAMES[c], iou, self.truth_count(c), self.pred_count(c));
        }
        let acc = self.pixel_accuracy().map_or("n/a".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(s, "pixel_accuracy\t{acc}");
        let miou = self.miou().map_or("n/a".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(s, "mIoU\t{miou}");
        s
    }

    /// Header row of predicted class names, then one row per ground-truth class.
    pub fn to_csv(&self) -> String {
        let mut s = format!("truth\\pred,{}\n", CLASS_NAMES.join(","));
        for (g, row) in self.m.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            let _ = writeln!(s, "{},{}", CLASS_NAMES[g], cells.join(","));
        }
        s
    }
}
