use super::LossResult;
use crate::error::{Error, Result};
use crate::types::FeatureMatrix;

/// Soft orthogonality between private and shared features:
/// `||hp_s^T hc_s||_F^2 + ||hp_t^T hc_t||_F^2`.
/// Gradients: `[hp_s, hc_s, hp_t, hc_t]`.
pub fn difference_loss(
    hp_s: &FeatureMatrix,
    hc_s: &FeatureMatrix,
    hp_t: &FeatureMatrix,
    hc_t: &FeatureMatrix,
) -> Result<LossResult> {
    let (a, gps, gcs) = orthogonality(hp_s, hc_s)?;
    let (b, gpt, gct) = orthogonality(hp_t, hc_t)?;
    Ok(LossResult {
        value: a + b,
        grads: vec![gps, gcs, gpt, gct],
    })
}

/// `||P^T C||_F^2` with `M = P^T C`: d/dP = 2 C M^T, d/dC = 2 P M.
fn orthogonality(p: &FeatureMatrix, c: &FeatureMatrix) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if p.rows() != c.rows() {
        return Err(Error::Shape(format!(
            "private features have {} rows, shared {}",
            p.rows(),
            c.rows()
        )));
    }
    let (n, dp, dc) = (p.rows(), p.cols(), c.cols());
    let mut m = vec![0.0; dp * dc];
    for r in 0..n {
        for i in 0..dp {
            let x = p.get(r, i);
            for j in 0..dc {
                m[i * dc + j] += x * c.get(r, j);
            }
        }
    }
    let value = m.iter().map(|x| x * x).sum();
    let mut gp = vec![0.0; n * dp];
    let mut gc = vec![0.0; n * dc];
    for r in 0..n {
        for i in 0..dp {
            for j in 0..dc {
                let mij = m[i * dc + j];
                gp[r * dp + i] += 2.0 * c.get(r, j) * mij;
                gc[r * dc + j] += 2.0 * p.get(r, i) * mij;
            }
        }
    }
    Ok((value, gp, gc))
}
