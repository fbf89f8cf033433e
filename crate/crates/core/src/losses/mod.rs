//! Loss kernels of the multi-task adaptation objective.
//!
//! Every kernel is a pure function of plain arrays returning the scalar loss
//! and its analytic gradient with respect to each differentiable argument
//! (see each kernel for the order of [`LossResult::grads`]). Log terms clamp
//! probabilities to `[EPS, 1 - EPS]`; the gradient is zero where the clamp is
//! active. Networks, including the domain converters, stay outside: callers
//! pass their outputs in.

mod adversarial;
mod bce;
mod conversion;
mod features;
mod lovasz;
mod segmentation;
pub mod selftest;

pub use adversarial::{boundary_loss, gan_loss_d, gan_loss_g};
pub use bce::{bce, domain_classification_loss};
pub use conversion::{
    conversion_outputs, cycle_loss, invariance_loss, mutual_conversion_loss, similarity_loss,
    ConversionOutputs, DomainConverter,
};
pub use features::difference_loss;
pub use lovasz::lovasz_softmax;
pub use segmentation::{
    dual_boundary_regularizer, seg_loss_source, seg_loss_target, weighted_ce, SegSourceWeights,
    SegTargetWeights,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::LossWeights;

/// Probability clamp for every log term.
pub const EPS: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    /// One gradient per differentiable argument, each shaped like it.
    pub grads: Vec<Vec<f64>>,
}

impl LossResult {
    /// Gradient with respect to the first prediction argument.
    pub fn grad(&self) -> &[f64] {
        &self.grads[0]
    }
}

/// The six task losses combined by [`total_loss`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    /// Private-feature domain classification.
    pub private: f64,
    pub boundary: f64,
    pub segmentation: f64,
    /// Mutual domain conversion.
    pub mutual: f64,
    /// Shared-feature similarity.
    pub similarity: f64,
    /// Private/shared difference.
    pub difference: f64,
}

pub fn total_loss(c: &LossComponents, w: &LossWeights) -> f64 {
    w.lambda_p * c.private
        + w.lambda_b * c.boundary
        + w.lambda_seg * c.segmentation
        + w.lambda_m * c.mutual
        + w.lambda_c * c.similarity
        + w.lambda_d * c.difference
}

pub(crate) fn check_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("{what}: {a} vs {b} elements")));
    }
    Ok(())
}

pub(crate) fn check_finite(xs: &[f64], what: &str) -> Result<()> {
    if let Some(x) = xs.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidValue(format!("{what} holds non-finite value {x}")));
    }
    Ok(())
}

#[inline]
pub(crate) fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `mean(|a - b|)` and its gradient with respect to `a` (the gradient with
/// respect to `b` is the negation).
pub(crate) fn mean_abs(a: &[f64], b: &[f64], what: &str) -> Result<(f64, Vec<f64>)> {
    check_len(a.len(), b.len(), what)?;
    if a.is_empty() {
        return Err(Error::EmptyBatch("mean absolute error over no elements"));
    }
    check_finite(a, what)?;
    check_finite(b, what)?;
    let n = a.len() as f64;
    let value = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / n;
    let grad = a.iter().zip(b).map(|(x, y)| sign(x - y) / n).collect();
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_loss_weighting() {
        let c = LossComponents {
            private: 1.0,
            boundary: 2.0,
            segmentation: 3.0,
            mutual: 4.0,
            similarity: 5.0,
            difference: 6.0,
        };
        assert_eq!(total_loss(&c, &LossWeights::zero()), 0.0);
        assert_eq!(total_loss(&c, &LossWeights::default()), 21.0);
        let w = LossWeights {
            lambda_d: 0.5,
            ..LossWeights::default()
        };
        assert_eq!(total_loss(&c, &w), 18.0);
    }

    #[test]
    fn total_loss_is_linear_in_each_component() {
        let w = LossWeights {
            lambda_p: 0.3,
            lambda_b: 1.7,
            lambda_seg: 2.0,
            lambda_m: 0.25,
            lambda_c: 4.0,
            lambda_d: 0.9,
            ..LossWeights::default()
        };
        let base = LossComponents {
            private: 0.4,
            boundary: 1.1,
            segmentation: 0.7,
            mutual: 2.2,
            similarity: 0.05,
            difference: 3.0,
        };
        let f0 = total_loss(&base, &w);
        let bump = |k: usize, d: f64| {
            let mut c = base;
            match k {
                0 => c.private += d,
                1 => c.boundary += d,
                2 => c.segmentation += d,
                3 => c.mutual += d,
                4 => c.similarity += d,
                _ => c.difference += d,
            }
            total_loss(&c, &w)
        };
        let lambdas = [w.lambda_p, w.lambda_b, w.lambda_seg, w.lambda_m, w.lambda_c, w.lambda_d];
        for (k, l) in lambdas.iter().enumerate() {
            assert!((bump(k, 1.0) - f0 - l).abs() < 1e-12);
            assert!((bump(k, 2.0) - f0 - 2.0 * l).abs() < 1e-12);
        }
        assert!((total_loss(&base, &w.scaled(3.0)) - 3.0 * f0).abs() < 1e-12);
    }
}
