use super::{check_finite, check_len, LossResult, EPS};
use crate::error::{Error, Result};

/// Mean binary cross-entropy over all elements, optionally weighting each
/// element's term. Gradient: `[d / d pred]`.
pub fn bce(pred: &[f64], target: &[f64], weights: Option<&[f64]>) -> Result<LossResult> {
    check_len(pred.len(), target.len(), "bce pred vs target")?;
    if let Some(w) = weights {
        check_len(pred.len(), w.len(), "bce pred vs weights")?;
        check_finite(w, "bce weights")?;
    }
    if pred.is_empty() {
        return Err(Error::EmptyBatch("bce over no elements"));
    }
    check_finite(pred, "bce pred")?;
    if let Some(t) = target.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::InvalidValue(format!("bce target {t} outside [0, 1]")));
    }
    let n = pred.len() as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; pred.len()];
    for (i, (&p, &t)) in pred.iter().zip(target).enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        let pc = p.clamp(EPS, 1.0 - EPS);
        value -= w * (t * pc.ln() + (1.0 - t) * (1.0 - pc).ln());
        if p > EPS && p < 1.0 - EPS {
            grad[i] = w * (-t / p + (1.0 - t) / (1.0 - p)) / n;
        }
    }
    Ok(LossResult {
        value: value / n,
        grads: vec![grad],
    })
}

/// Private-feature classifier loss: sources should score 1, targets 0.
/// Gradients: `[d / d pred_source, d / d pred_target]`.
pub fn domain_classification_loss(pred_source: &[f64], pred_target: &[f64]) -> Result<LossResult> {
    if pred_source.is_empty() || pred_target.is_empty() {
        return Err(Error::EmptyBatch("domain classification needs both domains"));
    }
    let s = bce(pred_source, &vec![1.0; pred_source.len()], None)?;
    let t = bce(pred_target, &vec![0.0; pred_target.len()], None)?;
    Ok(LossResult {
        value: s.value + t.value,
        grads: vec![s.grads.into_iter().next().unwrap(), t.grads.into_iter().next().unwrap()],
    })
}
