//! Mutual domain conversion and shared-feature similarity.

use super::{check_len, mean_abs, LossResult};
use crate::error::{Error, Result};
use crate::types::FeatureMatrix;

/// A pair of learned image-to-image translators between the two domains.
pub trait DomainConverter {
    fn source_to_target(&self, x: &[f64]) -> Vec<f64>;
    fn target_to_source(&self, x: &[f64]) -> Vec<f64>;
}

/// Converter outputs needed by the conversion losses, all flattened images.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConversionOutputs {
    pub source: Vec<f64>,
    pub target: Vec<f64>,
    /// Source pushed through the target→source converter.
    pub source_identity: Vec<f64>,
    /// Target pushed through the source→target converter.
    pub target_identity: Vec<f64>,
    /// Source → target → source.
    pub source_cycle: Vec<f64>,
    /// Target → source → target.
    pub target_cycle: Vec<f64>,
}

/// Runs `g` on both inputs to gather the identity and cycle images.
pub fn conversion_outputs(g: &impl DomainConverter, source: &[f64], target: &[f64]) -> ConversionOutputs {
    ConversionOutputs {
        source: source.to_vec(),
        target: target.to_vec(),
        source_identity: g.target_to_source(source),
        target_identity: g.source_to_target(target),
        source_cycle: g.target_to_source(&g.source_to_target(source)),
        target_cycle: g.source_to_target(&g.target_to_source(target)),
    }
}

/// `mean|x - y|` over a domain pair, plus the gradient for both sides.
fn pair(x: &[f64], y: &[f64], what: &str) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let (v, gx) = mean_abs(x, y, what)?;
    let gy = gx.iter().map(|g| -g).collect();
    Ok((v, gx, gy))
}

/// Identity-mapping term: a converter fed an image already in its output
/// domain should leave it unchanged.
/// Gradients: `[source, source_identity, target, target_identity]`.
pub fn invariance_loss(
    source: &[f64],
    source_identity: &[f64],
    target: &[f64],
    target_identity: &[f64],
) -> Result<LossResult> {
    let (a, gs, gsi) = pair(source, source_identity, "source vs identity")?;
    let (b, gt, gti) = pair(target, target_identity, "target vs identity")?;
    Ok(LossResult {
        value: a + b,
        grads: vec![gs, gsi, gt, gti],
    })
}

/// Cycle-consistency term.
/// Gradients: `[source, source_cycle, target, target_cycle]`.
pub fn cycle_loss(source: &[f64], source_cycle: &[f64], target: &[f64], target_cycle: &[f64]) -> Result<LossResult> {
    let (a, gs, gsc) = pair(source, source_cycle, "source vs cycle")?;
    let (b, gt, gtc) = pair(target, target_cycle, "target vs cycle")?;
    Ok(LossResult {
        value: a + b,
        grads: vec![gs, gsc, gt, gtc],
    })
}

/// Invariance plus cycle terms. Gradients follow the field order of
/// [`ConversionOutputs`].
pub fn mutual_conversion_loss(o: &ConversionOutputs) -> Result<LossResult> {
    let inv = invariance_loss(&o.source, &o.source_identity, &o.target, &o.target_identity)?;
    let cyc = cycle_loss(&o.source, &o.source_cycle, &o.target, &o.target_cycle)?;
    let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>();
    let [is, isi, it, iti]: [Vec<f64>; 4] = inv.grads.try_into().expect("four gradients");
    let [cs, csc, ct, ctc]: [Vec<f64>; 4] = cyc.grads.try_into().expect("four gradients");
    Ok(LossResult {
        value: inv.value + cyc.value,
        grads: vec![add(&is, &cs), add(&it, &ct), isi, iti, csc, ctc],
    })
}

/// Mean squared difference of the shared features of the two domains.
/// Gradients: `[d / d shared_source, d / d shared_target]`.
pub fn similarity_loss(shared_source: &FeatureMatrix, shared_target: &FeatureMatrix) -> Result<LossResult> {
    if (shared_source.rows(), shared_source.cols()) != (shared_target.rows(), shared_target.cols()) {
        return Err(Error::Shape(format!(
            "shared features {}x{} vs {}x{}",
            shared_source.rows(),
            shared_source.cols(),
            shared_target.rows(),
            shared_target.cols()
        )));
    }
    let a = shared_source.as_slice();
    let b = shared_target.as_slice();
    check_len(a.len(), b.len(), "shared features")?;
    let n = a.len() as f64;
    let value = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n;
    let ga: Vec<f64> = a.iter().zip(b).map(|(x, y)| 2.0 * (x - y) / n).collect();
    let gb = ga.iter().map(|g| -g).collect();
    Ok(LossResult {
        value,
        grads: vec![ga, gb],
    })
}
