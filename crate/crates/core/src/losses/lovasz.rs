//! Lovász-Softmax: the convex Lovász extension of the per-class Jaccard loss.

use super::{check_len, LossResult};
use crate::error::{Error, Result};
use crate::types::{ClassProbs, LabelImage};
use crate::IGNORE_LABEL;

/// Mean over the classes present in `labels` of the Lovász extension of
/// `1 - IoU`, evaluated on the per-pixel errors `|[y == c] - p_c|`. Ignore
/// pixels take no part. Error ties are ordered by pixel index.
/// Gradient: `[d / d probs]`.
pub fn lovasz_softmax(probs: &ClassProbs, labels: &LabelImage) -> Result<LossResult> {
    check_len(probs.classes(), labels.num_classes(), "class count")?;
    if probs.dims() != labels.dims() {
        return Err(Error::Shape(format!(
            "scores {:?} vs labels {:?}",
            probs.dims(),
            labels.dims()
        )));
    }
    let c = probs.classes();
    let y = labels.labels().as_slice();
    let pixels: Vec<usize> = (0..y.len()).filter(|&i| y[i] != IGNORE_LABEL).collect();
    if pixels.is_empty() {
        return Err(Error::AllIgnored);
    }
    let mut present = vec![false; c];
    pixels.iter().for_each(|&i| present[y[i] as usize] = true);
    let classes: Vec<usize> = (1..c).filter(|&k| present[k]).collect();
    let n_present = classes.len() as f64;

    let mut grad = vec![0.0; probs.as_slice().len()];
    let mut value = 0.0;
    let mut errs: Vec<(f64, usize)> = Vec::with_capacity(pixels.len());
    for &k in &classes {
        errs.clear();
        errs.extend(pixels.iter().map(|&i| {
            let fg = (y[i] as usize == k) as u8 as f64;
            ((fg - probs.at(i, k)).abs(), i)
        }));
        // stable: equal errors keep ascending pixel order
        errs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let p = errs.iter().filter(|&&(_, i)| y[i] as usize == k).count() as f64;
        let (mut cum_fg, mut cum_bg) = (0.0, 0.0);
        let mut prev = 0.0;
        for &(e, i) in &errs {
            let fg = y[i] as usize == k;
            if fg {
                cum_fg += 1.0;
            } else {
                cum_bg += 1.0;
            }
            let jac = 1.0 - (p - cum_fg) / (p + cum_bg);
            let g = jac - prev;
            prev = jac;
            value += e * g / n_present;
            // d e / d p_k is -1 on foreground pixels, +1 elsewhere
            grad[i * c + k] += if fg { -g } else { g } / n_present;
        }
    }
    Ok(LossResult {
        value,
        grads: vec![grad],
    })
}
