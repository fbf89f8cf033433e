//! Gradient and oracle self-checks for the loss kernels.
//!
//! Each [`GradCase`] draws random inputs for one kernel, rejecting draws that
//! sit within `KINK_MARGIN` of a non-differentiable point (clamp edges, sort
//! ties, absolute-value and hinge kinks), and exposes the kernel as a function
//! of its differentiable arguments. [`run_selftest`] compares the analytic
//! gradients against central differences and checks Lovász-Softmax against
//! brute-force IoU on every small hard labelling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::*;
use crate::boundary::{boundaries_from_labels, laplacian_energy};
use crate::grid::Grid;
use crate::types::{BoundaryMap, ClassProbs, FeatureMatrix, LabelImage, LossWeights};

/// Minimum distance from any kink accepted by the samplers.
pub const KINK_MARGIN: f64 = 1e-3;

type EvalFn = Box<dyn Fn(&[Vec<f64>]) -> Result<LossResult>>;
type AdmitFn = Box<dyn Fn(&[Vec<f64>]) -> bool>;

/// One random evaluation point of a kernel. `inputs` are the differentiable
/// arguments in the order of the kernel's gradients.
pub struct Sample {
    pub inputs: Vec<Vec<f64>>,
    eval: EvalFn,
    admissible: AdmitFn,
}

impl Sample {
    pub fn eval(&self, inputs: &[Vec<f64>]) -> Result<LossResult> {
        (self.eval)(inputs)
    }

    pub fn admissible(&self) -> bool {
        (self.admissible)(&self.inputs)
    }
}

pub struct GradCase {
    pub name: &'static str,
    draw: fn(&mut ChaCha8Rng) -> Sample,
}

impl GradCase {
    /// Draws until the point is admissible.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Sample {
        loop {
            let s = (self.draw)(rng);
            if s.admissible() {
                return s;
            }
        }
    }
}

const H: usize = 3;
const W: usize = 4;
const C: usize = 3;

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn softmax(rng: &mut ChaCha8Rng, scale: f64) -> Vec<f64> {
    let logits = uniform(rng, H * W * C, -scale, scale);
    ClassProbs::softmax(H, W, C, &logits).unwrap().into_vec()
}

fn labels(rng: &mut ChaCha8Rng) -> LabelImage {
    loop {
        let ys: Vec<u32> = (0..H * W).map(|_| rng.random_range(0..C as u32)).collect();
        if ys.iter().any(|&y| y != 0) {
            return LabelImage::new(Grid::from_vec(H, W, ys).unwrap(), C).unwrap();
        }
    }
}

fn probs(x: &[f64]) -> Result<ClassProbs> {
    ClassProbs::from_vec(H, W, C, x.to_vec())
}

fn bmap(x: &[f64]) -> Result<BoundaryMap> {
    BoundaryMap::new(Grid::from_vec(H, W, x.to_vec())?)
}

fn away(x: f64, kink: f64) -> bool {
    (x - kink).abs() > KINK_MARGIN
}

fn pairs_apart(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| away(*x, *y))
}

fn probs_unclamped(p: &[f64]) -> bool {
    p.iter().all(|&x| x > KINK_MARGIN && x < 1.0 - KINK_MARGIN)
}

/// Lovász sort is smooth when no two errors of a class are close.
fn lovasz_smooth(p: &[f64], labels: &LabelImage) -> bool {
    let y = labels.labels().as_slice();
    (1..C).all(|k| {
        let mut e: Vec<f64> = (0..H * W)
            .filter(|&i| y[i] != 0)
            .map(|i| ((y[i] as usize == k) as u8 as f64 - p[i * C + k]).abs())
            .collect();
        e.sort_by(f64::total_cmp);
        e.windows(2).all(|w| w[1] - w[0] > KINK_MARGIN)
    })
}

/// The hinge and argmax of the dual regularizer are smooth at `p`.
fn dual_smooth(p: &[f64], labels: &LabelImage, tau: f64) -> bool {
    let gt = boundaries_from_labels(labels, &Grid::filled(H, W, 1u8)).unwrap();
    (0..H * W).all(|i| {
        if gt.values().as_slice()[i] == 1.0 {
            return true;
        }
        let mut px = p[i * C..(i + 1) * C].to_vec();
        px.sort_by(|a, b| b.total_cmp(a));
        away(px[0], tau) && px[0] - px[1] > KINK_MARGIN
    })
}

fn features(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Vec<f64> {
    uniform(rng, r * c, -1.0, 1.0)
}

fn fm(r: usize, c: usize, x: &[f64]) -> Result<FeatureMatrix> {
    FeatureMatrix::new(r, c, x.to_vec())
}

const DUAL_TAU: f64 = 0.5;

/// Every differentiable kernel, each with a sampler of admissible points.
pub fn grad_cases() -> Vec<GradCase> {
    vec![
        GradCase {
            name: "bce",
            draw: |rng| {
                let t = uniform(rng, 8, 0.0, 1.0);
                let w = uniform(rng, 8, 0.5, 2.0);
                Sample {
                    inputs: vec![uniform(rng, 8, 0.02, 0.98)],
                    eval: Box::new(move |x| bce(&x[0], &t, Some(&w))),
                    admissible: Box::new(|_| true),
                }
            },
        },
        GradCase {
            name: "domain_classification_loss",
            draw: |rng| Sample {
                inputs: vec![uniform(rng, 6, 0.02, 0.98), uniform(rng, 5, 0.02, 0.98)],
                eval: Box::new(|x| domain_classification_loss(&x[0], &x[1])),
                admissible: Box::new(|_| true),
            },
        },
        GradCase {
            name: "gan_loss_d",
            draw: |rng| Sample {
                inputs: vec![uniform(rng, 6, -2.0, 2.0), uniform(rng, 7, -2.0, 2.0)],
                eval: Box::new(|x| gan_loss_d(&x[0], &x[1])),
                admissible: Box::new(|_| true),
            },
        },
        GradCase {
            name: "gan_loss_g",
            draw: |rng| Sample {
                inputs: vec![uniform(rng, 6, -2.0, 2.0)],
                eval: Box::new(|x| gan_loss_g(&x[0])),
                admissible: Box::new(|_| true),
            },
        },
        GradCase {
            name: "boundary_loss",
            draw: |rng| {
                let gt: Vec<f64> = (0..H * W).map(|_| rng.random_range(0..2) as f64).collect();
                let gt = bmap(&gt).unwrap();
                let w = LossWeights {
                    lambda_b_bce: 0.7,
                    lambda_b_gan: 1.3,
                    ..LossWeights::default()
                };
                Sample {
                    inputs: vec![uniform(rng, H * W, 0.02, 0.98), uniform(rng, 4, -2.0, 2.0)],
                    eval: Box::new(move |x| boundary_loss(&bmap(&x[0])?, &gt, &x[1], &w)),
                    admissible: Box::new(|_| true),
                }
            },
        },
        GradCase {
            name: "weighted_ce",
            draw: |rng| {
                let l = labels(rng);
                let cw = uniform(rng, C, 0.5, 2.0);
                Sample {
                    inputs: vec![softmax(rng, 2.0)],
                    eval: Box::new(move |x| weighted_ce(&probs(&x[0])?, &l, &cw)),
                    admissible: Box::new(|x| probs_unclamped(&x[0])),
                }
            },
        },
        GradCase {
            name: "lovasz_softmax",
            draw: |rng| {
                let l = labels(rng);
                let l2 = l.clone();
                Sample {
                    inputs: vec![softmax(rng, 2.0)],
                    eval: Box::new(move |x| lovasz_softmax(&probs(&x[0])?, &l)),
                    admissible: Box::new(move |x| lovasz_smooth(&x[0], &l2)),
                }
            },
        },
        GradCase {
            name: "dual_boundary_regularizer",
            draw: |rng| {
                let l = labels(rng);
                let l2 = l.clone();
                Sample {
                    inputs: vec![softmax(rng, 2.0), uniform(rng, H * W, 0.02, 0.98)],
                    eval: Box::new(move |x| dual_boundary_regularizer(&probs(&x[0])?, &l, &bmap(&x[1])?, DUAL_TAU)),
                    admissible: Box::new(move |x| probs_unclamped(&x[0]) && dual_smooth(&x[0], &l2, DUAL_TAU)),
                }
            },
        },
        GradCase {
            name: "seg_loss_source",
            draw: |rng| {
                let l = labels(rng);
                let l2 = l.clone();
                let cw = uniform(rng, C, 0.5, 2.0);
                let sub = SegSourceWeights {
                    ce: 0.7,
                    dual: 1.3,
                    lovasz: 0.9,
                    tau: DUAL_TAU,
                };
                Sample {
                    inputs: vec![softmax(rng, 2.0), uniform(rng, H * W, 0.02, 0.98)],
                    eval: Box::new(move |x| seg_loss_source(&probs(&x[0])?, &l, &bmap(&x[1])?, &cw, &sub)),
                    admissible: Box::new(move |x| {
                        probs_unclamped(&x[0]) && dual_smooth(&x[0], &l2, DUAL_TAU) && lovasz_smooth(&x[0], &l2)
                    }),
                }
            },
        },
        GradCase {
            name: "seg_loss_target",
            draw: |rng| {
                let sub = SegTargetWeights { gan: 0.8, lap: 1.2 };
                Sample {
                    inputs: vec![softmax(rng, 0.6), uniform(rng, H * W, 0.02, 0.98), uniform(rng, 4, -2.0, 2.0)],
                    eval: Box::new(move |x| seg_loss_target(&probs(&x[0])?, &bmap(&x[1])?, &x[2], &sub)),
                    admissible: Box::new(|x| {
                        let (_, energy) = laplacian_energy(&probs(&x[0]).unwrap());
                        energy.iter().zip(&x[1]).all(|(s, &b)| {
                            let root = s.sqrt();
                            root > KINK_MARGIN && away(root, 1.0) && away(root.min(1.0), b)
                        })
                    }),
                }
            },
        },
        GradCase {
            name: "invariance_loss",
            draw: |rng| Sample {
                inputs: (0..4).map(|k| uniform(rng, 5 + k / 2, -1.0, 1.0)).collect(),
                eval: Box::new(|x| invariance_loss(&x[0], &x[1], &x[2], &x[3])),
                admissible: Box::new(|x| pairs_apart(&x[0], &x[1]) && pairs_apart(&x[2], &x[3])),
            },
        },
        GradCase {
            name: "cycle_loss",
            draw: |rng| Sample {
                inputs: (0..4).map(|k| uniform(rng, 5 + k / 2, -1.0, 1.0)).collect(),
                eval: Box::new(|x| cycle_loss(&x[0], &x[1], &x[2], &x[3])),
                admissible: Box::new(|x| pairs_apart(&x[0], &x[1]) && pairs_apart(&x[2], &x[3])),
            },
        },
        GradCase {
            name: "mutual_conversion_loss",
            draw: |rng| Sample {
                // source, target, then the source- and target-shaped outputs
                inputs: [5, 6, 5, 6, 5, 6].iter().map(|&n| uniform(rng, n, -1.0, 1.0)).collect(),
                eval: Box::new(|x| {
                    mutual_conversion_loss(&ConversionOutputs {
                        source: x[0].clone(),
                        target: x[1].clone(),
                        source_identity: x[2].clone(),
                        target_identity: x[3].clone(),
                        source_cycle: x[4].clone(),
                        target_cycle: x[5].clone(),
                    })
                }),
                admissible: Box::new(|x| {
                    pairs_apart(&x[0], &x[2])
                        && pairs_apart(&x[1], &x[3])
                        && pairs_apart(&x[0], &x[4])
                        && pairs_apart(&x[1], &x[5])
                }),
            },
        },
        GradCase {
            name: "similarity_loss",
            draw: |rng| Sample {
                inputs: vec![features(rng, 4, 3), features(rng, 4, 3)],
                eval: Box::new(|x| similarity_loss(&fm(4, 3, &x[0])?, &fm(4, 3, &x[1])?)),
                admissible: Box::new(|_| true),
            },
        },
        GradCase {
            name: "difference_loss",
            draw: |rng| Sample {
                inputs: vec![features(rng, 5, 3), features(rng, 5, 2), features(rng, 4, 3), features(rng, 4, 2)],
                eval: Box::new(|x| {
                    difference_loss(&fm(5, 3, &x[0])?, &fm(5, 2, &x[1])?, &fm(4, 3, &x[2])?, &fm(4, 2, &x[3])?)
                }),
                admissible: Box::new(|_| true),
            },
        },
    ]
}

/// Central-difference gradient of the sample's loss at its inputs.
pub fn central_difference(sample: &Sample, step: f64) -> Result<Vec<Vec<f64>>> {
    let mut x = sample.inputs.clone();
    let mut out = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let mut g = Vec::with_capacity(x[j].len());
        for e in 0..x[j].len() {
            let x0 = x[j][e];
            x[j][e] = x0 + step;
            let fp = sample.eval(&x)?.value;
            x[j][e] = x0 - step;
            let fm = sample.eval(&x)?.value;
            x[j][e] = x0;
            g.push((fp - fm) / (2.0 * step));
        }
        out.push(g);
    }
    Ok(out)
}

/// `||a - b|| / max(||a||, ||b||)` over all gradient blocks, with a floor on
/// the denominator so that two vanishing gradients agree.
pub fn relative_error(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let flat = |x: &[Vec<f64>]| x.iter().flatten().copied().collect::<Vec<_>>();
    let (a, b) = (flat(a), flat(b));
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(&a).max(norm(&b)).max(1e-8)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelftestConfig {
    pub seed: u64,
    pub points_per_kernel: usize,
    pub step: f64,
    pub tolerance: f64,
}

impl Default for SelftestConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            points_per_kernel: 100,
            step: 1e-5,
            tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelReport {
    pub name: String,
    pub points: usize,
    pub max_rel_err: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelftestReport {
    pub config: SelftestConfig,
    pub kernels: Vec<KernelReport>,
    pub checks: Vec<CheckReport>,
    pub passed: bool,
}

pub fn run_selftest(cfg: &SelftestConfig) -> Result<SelftestReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut kernels = Vec::new();
    for case in grad_cases() {
        let mut worst: f64 = 0.0;
        for _ in 0..cfg.points_per_kernel {
            let s = case.sample(&mut rng);
            let analytic = s.eval(&s.inputs)?.grads;
            let numeric = central_difference(&s, cfg.step)?;
            worst = worst.max(relative_error(&analytic, &numeric));
        }
        kernels.push(KernelReport {
            name: case.name.to_string(),
            points: cfg.points_per_kernel,
            max_rel_err: worst,
            passed: worst < cfg.tolerance,
        });
    }
    let checks = vec![lovasz_exhaustive(), total_loss_linearity(&mut rng)];
    let passed = kernels.iter().all(|k| k.passed) && checks.iter().all(|c| c.passed);
    Ok(SelftestReport {
        config: *cfg,
        kernels,
        checks,
        passed,
    })
}

/// Mean over present classes of `1 - IoU` between hard label maps.
fn brute_force_jaccard(gt: &[u32], pred: &[u32], classes: usize) -> Option<f64> {
    let scored: Vec<usize> = (0..gt.len()).filter(|&i| gt[i] != 0).collect();
    if scored.is_empty() {
        return None;
    }
    let present: Vec<u32> = (1..classes as u32).filter(|&k| scored.iter().any(|&i| gt[i] == k)).collect();
    let total: f64 = present
        .iter()
        .map(|&k| {
            let inter = scored.iter().filter(|&&i| gt[i] == k && pred[i] == k).count();
            let union = scored.iter().filter(|&&i| gt[i] == k || pred[i] == k).count();
            1.0 - inter as f64 / union as f64
        })
        .sum();
    Some(total / present.len() as f64)
}

fn lovasz_exhaustive() -> CheckReport {
    let (n, c) = (4usize, 3usize);
    let decode = |mut code: usize| {
        (0..n)
            .map(|_| {
                let d = (code % c) as u32;
                code /= c;
                d
            })
            .collect::<Vec<u32>>()
    };
    let combos = c.pow(n as u32);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for g in 0..combos {
        let gt = decode(g);
        let gl = LabelImage::new(Grid::from_vec(2, 2, gt.clone()).unwrap(), c).unwrap();
        for p in 0..combos {
            let pred = decode(p);
            let pl = LabelImage::new(Grid::from_vec(2, 2, pred.clone()).unwrap(), c).unwrap();
            match (lovasz_softmax(&pl.one_hot(), &gl), brute_force_jaccard(&gt, &pred, c)) {
                (Ok(r), Some(want)) => worst = worst.max((r.value - want).abs()),
                (Err(Error::AllIgnored), None) => {}
                _ => failures += 1,
            }
        }
    }
    CheckReport {
        name: "lovasz_exhaustive".into(),
        passed: failures == 0 && worst <= 1e-9,
        detail: format!("{} labellings, max |err| {worst:.3e}, {failures} mismatched outcomes", combos * combos),
    }
}

fn total_loss_linearity(rng: &mut ChaCha8Rng) -> CheckReport {
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let v = uniform(rng, 6, 0.0, 5.0);
        let l = uniform(rng, 6, 0.0, 3.0);
        let c = LossComponents {
            private: v[0],
            boundary: v[1],
            segmentation: v[2],
            mutual: v[3],
            similarity: v[4],
            difference: v[5],
        };
        let w = LossWeights {
            lambda_p: l[0],
            lambda_b: l[1],
            lambda_seg: l[2],
            lambda_m: l[3],
            lambda_c: l[4],
            lambda_d: l[5],
            ..LossWeights::default()
        };
        let want: f64 = v.iter().zip(&l).map(|(a, b)| a * b).sum();
        worst = worst.max((total_loss(&c, &w) - want).abs());
    }
    CheckReport {
        name: "total_loss_linearity".into(),
        passed: worst < 1e-12,
        detail: format!("max |err| {worst:.3e}"),
    }
}
