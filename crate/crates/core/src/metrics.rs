//! Confusion matrices and per-class IoU.
//!
//! Rows are ground truth, columns predictions. Pixels whose ground truth is
//! the ignore class are never counted; class 0 is left out of the mean.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::IGNORE_LABEL;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidValue(format!(
                "need at least 2 classes (ignore + one), got {num_classes}"
            )));
        }
        Ok(Self {
            num_classes,
            counts: vec![0; num_classes * num_classes],
        })
    }

    /// Matrix of many `(gt, pred)` label sequences, accumulated in parallel.
    pub fn from_pairs(num_classes: usize, pairs: &[(&[u32], &[u32])]) -> Result<Self> {
        let empty = Self::new(num_classes)?;
        par::fold_chunks(
            pairs,
            1,
            || Ok(empty.clone()),
            |acc: Result<Self>, chunk| {
                let mut m = acc?;
                for (gt, pred) in chunk {
                    m.accumulate(gt, pred)?;
                }
                Ok(m)
            },
            |a, b| {
                let mut a = a?;
                a.merge(&b?)?;
                Ok(a)
            },
        )
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.num_classes + pred]
    }

    /// Number of scored (non-ignore) samples.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds one labelled sequence; nothing is counted if any id is out of range.
    pub fn accumulate(&mut self, gt: &[u32], pred: &[u32]) -> Result<()> {
        if gt.len() != pred.len() {
            return Err(Error::Shape(format!(
                "{} ground-truth vs {} predicted labels",
                gt.len(),
                pred.len()
            )));
        }
        let c = self.num_classes;
        if let Some(&id) = gt.iter().chain(pred).find(|&&l| l as usize >= c) {
            return Err(Error::ClassRange { id, num_classes: c });
        }
        for (&g, &p) in gt.iter().zip(pred) {
            if g != IGNORE_LABEL {
                self.counts[g as usize * c + p as usize] += 1;
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if other.num_classes != self.num_classes {
            return Err(Error::Shape(format!(
                "cannot merge {}-class and {}-class matrices",
                self.num_classes, other.num_classes
            )));
        }
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        Ok(())
    }

    /// `(tp, fp, fn)` for class `k`.
    pub fn class_counts(&self, k: usize) -> (u64, u64, u64) {
        let c = self.num_classes;
        let tp = self.get(k, k);
        let fp = (0..c).filter(|&g| g != k).map(|g| self.get(g, k)).sum();
        let fn_ = (0..c).filter(|&p| p != k).map(|p| self.get(k, p)).sum();
        (tp, fp, fn_)
    }

    pub fn iou_report(&self, absent: AbsentPolicy) -> Result<IouReport> {
        if self.total() == 0 {
            return Err(Error::EmptyMatrix);
        }
        let per_class: Vec<ClassIou> = (1..self.num_classes)
            .map(|k| {
                let (tp, fp, fn_) = self.class_counts(k);
                let denom = tp + fp + fn_;
                let iou = match (denom, absent) {
                    (0, AbsentPolicy::Exclude) => None,
                    (0, AbsentPolicy::Zero) => Some(0.0),
                    _ => Some(tp as f64 / denom as f64),
                };
                ClassIou {
                    class: k,
                    name: None,
                    iou,
                    tp,
                    fp,
                    fn_,
                }
            })
            .collect();
        let scored: Vec<f64> = per_class.iter().filter_map(|c| c.iou).collect();
        let miou = scored.iter().sum::<f64>() / scored.len() as f64;
        Ok(IouReport {
            per_class,
            miou,
            scored_samples: self.total(),
            absent,
        })
    }
}

/// How classes with no ground truth and no prediction enter the mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbsentPolicy {
    /// Left out of the mean.
    #[default]
    Exclude,
    /// Counted as IoU 0.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassIou {
    pub class: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// `None` for an absent class under [`AbsentPolicy::Exclude`].
    pub iou: Option<f64>,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IouReport {
    /// Classes `1..C`.
    pub per_class: Vec<ClassIou>,
    pub miou: f64,
    pub scored_samples: u64,
    pub absent: AbsentPolicy,
}

impl IouReport {
    /// Attaches class names, indexed by class id.
    pub fn with_names(mut self, names: &[String]) -> Self {
        for c in &mut self.per_class {
            c.name = names.get(c.class).cloned();
        }
        self
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>5}  {:<16} {:>8}", "class", "name", "IoU");
        for c in &self.per_class {
            let iou = c.iou.map_or("-".to_string(), |x| format!("{:.4}", x));
            let _ = writeln!(s, "{:>5}  {:<16} {:>8}", c.class, c.name.as_deref().unwrap_or(""), iou);
        }
        let _ = writeln!(s, "{:>5}  {:<16} {:>8.4}", "", "mIoU", self.miou);
        s
    }
}
