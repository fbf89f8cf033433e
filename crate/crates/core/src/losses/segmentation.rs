//! Segmentation task: supervised on the source domain, boundary-consistent
//! and adversarial on the target domain.

use serde::{Deserialize, Serialize};

use super::{check_finite, check_len, gan_loss_g, lovasz_softmax, sign, LossResult, EPS};
use crate::boundary::{boundaries_from_labels, check_same_dims, laplacian_adjoint, laplacian_energy};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::types::{BoundaryMap, ClassProbs, LabelImage};
use crate::IGNORE_LABEL;

fn check_pair(probs: &ClassProbs, labels: &LabelImage) -> Result<()> {
    check_len(probs.classes(), labels.num_classes(), "class count")?;
    check_same_dims(probs.dims(), labels.dims(), "scores vs labels")
}

/// Class-weighted cross-entropy averaged over the non-ignore pixels.
/// Gradient: `[d / d probs]`.
pub fn weighted_ce(probs: &ClassProbs, labels: &LabelImage, class_weights: &[f64]) -> Result<LossResult> {
    check_pair(probs, labels)?;
    check_len(class_weights.len(), probs.classes(), "class weights")?;
    check_finite(class_weights, "class weights")?;
    let c = probs.classes();
    let y = labels.labels().as_slice();
    let n = y.iter().filter(|&&l| l != IGNORE_LABEL).count();
    if n == 0 {
        return Err(Error::AllIgnored);
    }
    let n = n as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; probs.as_slice().len()];
    for (i, &l) in y.iter().enumerate() {
        if l == IGNORE_LABEL {
            continue;
        }
        let k = l as usize;
        let p = probs.at(i, k);
        let w = class_weights[k];
        value -= w * p.clamp(EPS, 1.0 - EPS).ln();
        if p > EPS && p < 1.0 - EPS {
            grad[i * c + k] = -w / (p * n);
        }
    }
    Ok(LossResult {
        value: value / n,
        grads: vec![grad],
    })
}

/// Cross-entropy on ground-truth boundary pixels, plus a term that penalizes
/// the predicted boundary where the ground truth has none:
/// `mean_B(-ln p_y) + mean(pred_b * [gt_b = 0] * max(0, max_c p_c - tau))`.
///
/// The second term discourages confident, boundary-flagged predictions away
/// from real class transitions. Gradients: `[d / d probs, d / d pred_b]`.
pub fn dual_boundary_regularizer(
    probs: &ClassProbs,
    labels: &LabelImage,
    pred_b: &BoundaryMap,
    tau: f64,
) -> Result<LossResult> {
    check_pair(probs, labels)?;
    check_same_dims(probs.dims(), pred_b.dims(), "scores vs boundary prediction")?;
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidValue(format!("tau {tau} outside [0, 1]")));
    }
    let (h, w) = probs.dims();
    let c = probs.classes();
    let gt = boundaries_from_labels(labels, &Grid::filled(h, w, 1u8))?;
    let gt = gt.values().as_slice();
    let y = labels.labels().as_slice();
    let b = pred_b.values().as_slice();
    let nb = gt.iter().filter(|&&g| g == 1.0).count();
    let n = (h * w) as f64;

    let mut value = 0.0;
    let mut gp = vec![0.0; probs.as_slice().len()];
    let mut gb = vec![0.0; h * w];
    for i in 0..h * w {
        if gt[i] == 1.0 {
            let k = y[i] as usize;
            let p = probs.at(i, k);
            value -= p.clamp(EPS, 1.0 - EPS).ln() / nb as f64;
            if p > EPS && p < 1.0 - EPS {
                gp[i * c + k] = -1.0 / (p * nb as f64);
            }
        } else {
            let (k, pmax) = argmax(&probs.as_slice()[i * c..(i + 1) * c]);
            let excess = pmax - tau;
            if excess > 0.0 {
                value += b[i] * excess / n;
                gb[i] = excess / n;
                gp[i * c + k] = b[i] / n;
            }
        }
    }
    Ok(LossResult {
        value,
        grads: vec![gp, gb],
    })
}

/// First index of the largest value.
fn argmax(xs: &[f64]) -> (usize, f64) {
    xs.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, &x)| if x > best.1 { (k, x) } else { best })
}

/// Weights of the three source segmentation terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegSourceWeights {
    pub ce: f64,
    pub dual: f64,
    pub lovasz: f64,
    pub tau: f64,
}

impl Default for SegSourceWeights {
    fn default() -> Self {
        Self {
            ce: 1.0,
            dual: 1.0,
            lovasz: 1.0,
            tau: 0.8,
        }
    }
}

/// Source segmentation loss: weighted CE + dual boundary regularizer +
/// Lovász-Softmax. Gradients: `[d / d probs, d / d pred_b]`.
pub fn seg_loss_source(
    probs: &ClassProbs,
    labels: &LabelImage,
    pred_b: &BoundaryMap,
    class_weights: &[f64],
    sub: &SegSourceWeights,
) -> Result<LossResult> {
    let ce = weighted_ce(probs, labels, class_weights)?;
    let dual = dual_boundary_regularizer(probs, labels, pred_b, sub.tau)?;
    let lov = lovasz_softmax(probs, labels)?;
    let gp = (0..probs.as_slice().len())
        .map(|j| sub.ce * ce.grads[0][j] + sub.dual * dual.grads[0][j] + sub.lovasz * lov.grads[0][j])
        .collect();
    let gb = dual.grads[1].iter().map(|g| sub.dual * g).collect();
    Ok(LossResult {
        value: sub.ce * ce.value + sub.dual * dual.value + sub.lovasz * lov.value,
        grads: vec![gp, gb],
    })
}

/// Weights of the two target segmentation terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegTargetWeights {
    pub gan: f64,
    pub lap: f64,
}

impl Default for SegTargetWeights {
    fn default() -> Self {
        Self { gan: 1.0, lap: 1.0 }
    }
}

/// Target segmentation loss: the generator term on the discriminator's
/// scores plus `mean(|laplacian_edge(probs) - pred_b|)`, which ties the class
/// transitions of the target prediction to its predicted boundaries.
/// Gradients: `[d / d probs, d / d pred_b, d / d fake_scores]`.
pub fn seg_loss_target(
    probs: &ClassProbs,
    pred_b: &BoundaryMap,
    fake_scores: &[f64],
    sub: &SegTargetWeights,
) -> Result<LossResult> {
    check_same_dims(probs.dims(), pred_b.dims(), "scores vs boundary prediction")?;
    check_finite(probs.as_slice(), "class scores")?;
    let (h, w) = probs.dims();
    let c = probs.classes();
    let n = (h * w) as f64;
    let g = gan_loss_g(fake_scores)?;
    let (lap, energy) = laplacian_energy(probs);
    let b = pred_b.values().as_slice();

    let mut lap_value = 0.0;
    let mut gb = vec![0.0; h * w];
    // d value / d L(t, k) before the adjoint
    let mut dl = vec![0.0; h * w * c];
    for t in 0..h * w {
        let root = energy[t].sqrt();
        let d = root.min(1.0) - b[t];
        lap_value += d.abs() / n;
        let s = sign(d) / n;
        gb[t] = -sub.lap * s;
        if root > 0.0 && root < 1.0 {
            for k in 0..c {
                dl[t * c + k] = sub.lap * s * lap[t * c + k] / root;
            }
        }
    }
    let mut gp = vec![0.0; h * w * c];
    for s_px in 0..h * w {
        for (t, wgt) in laplacian_adjoint(h, w, s_px / w, s_px % w) {
            for k in 0..c {
                gp[s_px * c + k] += wgt * dl[t * c + k];
            }
        }
    }
    Ok(LossResult {
        value: sub.gan * g.value + sub.lap * lap_value,
        grads: vec![
            gp,
            gb,
            g.grads[0].iter().map(|x| sub.gan * x).collect(),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(h: usize, w: usize, ys: Vec<u32>, c: usize) -> LabelImage {
        LabelImage::new(Grid::from_vec(h, w, ys).unwrap(), c).unwrap()
    }

    #[test]
    fn perfect_prediction_scores_zero() {
        let l = img(2, 4, vec![1, 1, 2, 2, 1, 1, 2, 0], 3);
        let b = BoundaryMap::new(Grid::filled(2, 4, 0.0)).unwrap();
        let r = seg_loss_source(&l.one_hot(), &l, &b, &[1.0; 3], &SegSourceWeights::default()).unwrap();
        assert!(r.value.abs() < 1e-6, "{}", r.value);
    }

    #[test]
    fn ce_ignores_class_zero() {
        let l = img(1, 2, vec![0, 1], 2);
        let p = ClassProbs::from_vec(1, 2, 2, vec![0.9, 0.1, 0.5, 0.5]).unwrap();
        let r = weighted_ce(&p, &l, &[1.0, 2.0]).unwrap();
        assert!((r.value - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(r.grad()[0], 0.0);
        assert!(matches!(
            weighted_ce(&p, &img(1, 2, vec![0, 0], 2), &[1.0, 1.0]),
            Err(Error::AllIgnored)
        ));
    }

    #[test]
    fn dual_regularizer_penalizes_confident_interior_edges() {
        let l = img(1, 4, vec![1, 1, 1, 1], 2);
        let p = ClassProbs::from_vec(1, 4, 2, [0.0, 1.0].repeat(4)).unwrap();
        let quiet = BoundaryMap::new(Grid::filled(1, 4, 0.0)).unwrap();
        let loud = BoundaryMap::new(Grid::filled(1, 4, 1.0)).unwrap();
        assert_eq!(dual_boundary_regularizer(&p, &l, &quiet, 0.8).unwrap().value, 0.0);
        let r = dual_boundary_regularizer(&p, &l, &loud, 0.8).unwrap();
        assert!((r.value - 0.2).abs() < 1e-12);
    }

    #[test]
    fn target_loss_zero_when_consistent() {
        let l = img(3, 6, (0..18).map(|i| 1 + ((i % 6) >= 3) as u32).collect(), 3);
        let p = l.one_hot();
        let edge = crate::boundary::laplacian_edge(&p).unwrap();
        let r = seg_loss_target(&p, &edge, &[1.0, 1.0], &SegTargetWeights::default()).unwrap();
        assert_eq!(r.value, 0.0);
    }
}
