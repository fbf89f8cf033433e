//! Least-squares adversarial terms.

use super::{bce, check_finite, LossResult};
use crate::error::{Error, Result};
use crate::types::{BoundaryMap, LossWeights};

/// Discriminator loss `0.5 mean((real - 1)^2) + 0.5 mean(fake^2)`.
/// Gradients: `[d / d real, d / d fake]`.
pub fn gan_loss_d(scores_real: &[f64], scores_fake: &[f64]) -> Result<LossResult> {
    if scores_real.is_empty() || scores_fake.is_empty() {
        return Err(Error::EmptyBatch("discriminator scores"));
    }
    check_finite(scores_real, "real scores")?;
    check_finite(scores_fake, "fake scores")?;
    let nr = scores_real.len() as f64;
    let nf = scores_fake.len() as f64;
    let value = 0.5 * scores_real.iter().map(|s| (s - 1.0).powi(2)).sum::<f64>() / nr
        + 0.5 * scores_fake.iter().map(|s| s * s).sum::<f64>() / nf;
    Ok(LossResult {
        value,
        grads: vec![
            scores_real.iter().map(|s| (s - 1.0) / nr).collect(),
            scores_fake.iter().map(|s| s / nf).collect(),
        ],
    })
}

/// Generator loss `0.5 mean((fake - 1)^2)`. Gradient: `[d / d fake]`.
pub fn gan_loss_g(scores_fake: &[f64]) -> Result<LossResult> {
    if scores_fake.is_empty() {
        return Err(Error::EmptyBatch("generator scores"));
    }
    check_finite(scores_fake, "fake scores")?;
    let n = scores_fake.len() as f64;
    Ok(LossResult {
        value: 0.5 * scores_fake.iter().map(|s| (s - 1.0).powi(2)).sum::<f64>() / n,
        grads: vec![scores_fake.iter().map(|s| (s - 1.0) / n).collect()],
    })
}

/// Boundary task: BCE on source boundaries plus an adversarial term that keeps
/// target boundary predictions from collapsing to blank maps.
/// Gradients: `[d / d pred_b_source, d / d fake_scores_target]`.
pub fn boundary_loss(
    pred_b_source: &BoundaryMap,
    gt_b_source: &BoundaryMap,
    fake_scores_target: &[f64],
    w: &LossWeights,
) -> Result<LossResult> {
    if pred_b_source.dims() != gt_b_source.dims() {
        return Err(Error::Shape(format!(
            "boundary prediction {:?} vs ground truth {:?}",
            pred_b_source.dims(),
            gt_b_source.dims()
        )));
    }
    let b = bce(
        pred_b_source.values().as_slice(),
        gt_b_source.values().as_slice(),
        None,
    )?;
    let g = gan_loss_g(fake_scores_target)?;
    let scale = |g: Vec<f64>, k: f64| g.into_iter().map(|x| x * k).collect::<Vec<_>>();
    Ok(LossResult {
        value: w.lambda_b_bce * b.value + w.lambda_b_gan * g.value,
        grads: vec![
            scale(b.grads.into_iter().next().unwrap(), w.lambda_b_bce),
            scale(g.grads.into_iter().next().unwrap(), w.lambda_b_gan),
        ],
    })
}
