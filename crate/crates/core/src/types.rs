//! Domain types shared by every stage of the pipeline, and the stack
//! invariant checker.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ensure_dims, Grid};

/// One LiDAR return. Coordinates in meters, reflectivity normalized to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub reflectivity: f32,
}

impl Point {
    pub fn new(x: f32, y: f32, z: f32, reflectivity: f32) -> Self {
        Self {
            x,
            y,
            z,
            reflectivity,
        }
    }

    #[inline]
    pub fn xyz(&self) -> [f64; 3] {
        [self.x as f64, self.y as f64, self.z as f64]
    }

    #[inline]
    pub fn range(&self) -> f64 {
        norm3(self.xyz())
    }
}

/// All returns of a single sweep.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Point>,
}

impl PointCloud {
    /// Rejects non-finite coordinates and reflectivity outside [0, 1].
    pub fn new(points: Vec<Point>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::InvalidValue(format!(
                    "point {i} has non-finite coordinates"
                )));
            }
            if !(0.0..=1.0).contains(&p.reflectivity) {
                return Err(Error::InvalidValue(format!(
                    "point {i} reflectivity {} outside [0, 1]",
                    p.reflectivity
                )));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn count(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Beam geometry of a rotating LiDAR and the range-image raster it maps to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub name: String,
    pub height: usize,
    pub width: usize,
    /// Upward field of view, degrees above the horizon.
    pub fov_up: f64,
    /// Total vertical field of view, degrees.
    pub fov_total: f64,
    /// Returns closer than this (meters) are dropped.
    pub min_range: f64,
}

impl SensorModel {
    pub const DEFAULT_MIN_RANGE: f64 = 1e-3;

    pub fn new(name: impl Into<String>, height: usize, width: usize, fov_up: f64, fov_total: f64) -> Result<Self> {
        let sensor = Self {
            name: name.into(),
            height,
            width,
            fov_up,
            fov_total,
            min_range: Self::DEFAULT_MIN_RANGE,
        };
        sensor.check()?;
        Ok(sensor)
    }

    /// 64-beam, 2048-column geometry with +3° / 28° vertical field of view.
    pub fn hdl64() -> Self {
        Self::new("hdl64", 64, 2048, 3.0, 28.0).expect("static geometry is valid")
    }

    pub fn check(&self) -> Result<()> {
        if !(self.fov_up > 0.0 && self.fov_up < self.fov_total && self.fov_total <= 180.0) {
            return Err(Error::DegenerateSensor(format!(
                "need 0 < fov_up < fov_total <= 180, got fov_up={} fov_total={}",
                self.fov_up, self.fov_total
            )));
        }
        if self.height < 2 || self.width < 4 {
            return Err(Error::DegenerateSensor(format!(
                "need height >= 2 and width >= 4, got {}x{}",
                self.height, self.width
            )));
        }
        if !(self.min_range >= 0.0 && self.min_range.is_finite()) {
            return Err(Error::DegenerateSensor(format!(
                "min_range {} must be finite and >= 0",
                self.min_range
            )));
        }
        Ok(())
    }
}

/// Multi-channel range image produced by spherical projection.
///
/// Empty cells hold range 0, index -1, zero coordinates and zero normals.
/// Cells filled by stripe repair carry `synthetic = 1`: they are valid
/// (mask 1, positive range) but have no source point, so their index stays -1.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeImageStack {
    pub range: Grid<f64>,
    pub reflectivity: Grid<f64>,
    pub normals: Grid<[f64; 3]>,
    pub coords: Grid<[f64; 3]>,
    pub index: Grid<i64>,
    pub mask: Grid<u8>,
    pub synthetic: Grid<u8>,
}

impl RangeImageStack {
    /// All-invalid stack.
    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            range: Grid::filled(height, width, 0.0),
            reflectivity: Grid::filled(height, width, 0.0),
            normals: Grid::filled(height, width, [0.0; 3]),
            coords: Grid::filled(height, width, [0.0; 3]),
            index: Grid::filled(height, width, -1),
            mask: Grid::filled(height, width, 0),
            synthetic: Grid::filled(height, width, 0),
        }
    }

    pub fn height(&self) -> usize {
        self.range.height()
    }

    pub fn width(&self) -> usize {
        self.range.width()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.range.dims()
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m == 1).count()
    }

    pub fn crop_columns(&self, u0: usize, width: usize) -> Result<Self> {
        Ok(Self {
            range: self.range.crop_columns(u0, width)?,
            reflectivity: self.reflectivity.crop_columns(u0, width)?,
            normals: self.normals.crop_columns(u0, width)?,
            coords: self.coords.crop_columns(u0, width)?,
            index: self.index.crop_columns(u0, width)?,
            mask: self.mask.crop_columns(u0, width)?,
            synthetic: self.synthetic.crop_columns(u0, width)?,
        })
    }

    pub(crate) fn check_dims(&self) -> Result<()> {
        ensure_dims(&self.range, &self.reflectivity, "reflectivity")?;
        ensure_dims(&self.range, &self.normals, "normals")?;
        ensure_dims(&self.range, &self.coords, "coords")?;
        ensure_dims(&self.range, &self.index, "index")?;
        ensure_dims(&self.range, &self.mask, "mask")?;
        ensure_dims(&self.range, &self.synthetic, "synthetic")
    }
}

/// Per-pixel semantic class ids. Class 0 is the ignore class.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelImage {
    labels: Grid<u32>,
    num_classes: usize,
}

impl LabelImage {
    pub fn new(labels: Grid<u32>, num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidValue(format!(
                "need at least 2 classes (ignore + one), got {num_classes}"
            )));
        }
        if let Some(&id) = labels.iter().find(|&&l| l as usize >= num_classes) {
            return Err(Error::ClassRange { id, num_classes });
        }
        Ok(Self {
            labels,
            num_classes,
        })
    }

    pub fn labels(&self) -> &Grid<u32> {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dims(&self) -> (usize, usize) {
        self.labels.dims()
    }

    pub fn into_grid(self) -> Grid<u32> {
        self.labels
    }

    pub fn crop_columns(&self, u0: usize, width: usize) -> Result<Self> {
        Ok(Self {
            labels: self.labels.crop_columns(u0, width)?,
            num_classes: self.num_classes,
        })
    }

    /// Hard one-hot probabilities; ignore pixels put their mass on class 0.
    pub fn one_hot(&self) -> ClassProbs {
        let c = self.num_classes;
        let mut data = vec![0.0; self.labels.len() * c];
        for (i, &l) in self.labels.iter().enumerate() {
            data[i * c + l as usize] = 1.0;
        }
        ClassProbs::from_vec(self.labels.height(), self.labels.width(), c, data)
            .expect("dimensions agree by construction")
    }
}

/// Soft or hard edge map with values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMap {
    values: Grid<f64>,
}

impl BoundaryMap {
    pub fn new(values: Grid<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::InvalidValue(format!(
                "boundary value {bad} outside [0, 1]"
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Grid<f64> {
        &self.values
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dims()
    }

    pub fn into_grid(self) -> Grid<f64> {
        self.values
    }
}

/// H×W×C class scores stored pixel-major (the C scores of a pixel are contiguous).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassProbs {
    height: usize,
    width: usize,
    classes: usize,
    data: Vec<f64>,
}

impl ClassProbs {
    pub fn from_vec(height: usize, width: usize, classes: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * classes || classes == 0 {
            return Err(Error::Shape(format!(
                "{} scores cannot fill {height}x{width}x{classes}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            classes,
            data,
        })
    }

    /// Softmax over the class axis of raw logits.
    pub fn softmax(height: usize, width: usize, classes: usize, logits: &[f64]) -> Result<Self> {
        let mut data = logits.to_vec();
        if data.len() != height * width * classes || classes == 0 {
            return Err(Error::Shape(format!(
                "{} logits cannot fill {height}x{width}x{classes}",
                data.len()
            )));
        }
        for px in data.chunks_exact_mut(classes) {
            let m = px.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for x in px.iter_mut() {
                *x = (*x - m).exp();
                s += *x;
            }
            px.iter_mut().for_each(|x| *x /= s);
        }
        Self::from_vec(height, width, classes, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn pixel(&self, v: usize, u: usize) -> &[f64] {
        let o = (v * self.width + u) * self.classes;
        &self.data[o..o + self.classes]
    }

    #[inline]
    pub fn at(&self, pixel: usize, class: usize) -> f64 {
        self.data[pixel * self.classes + class]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Every pixel's scores sum to 1 within `tol`.
    pub fn check_normalized(&self, tol: f64) -> Result<()> {
        for (i, px) in self.data.chunks_exact(self.classes).enumerate() {
            let sum: f64 = px.iter().sum();
            if (sum - 1.0).abs() > tol || px.iter().any(|p| !p.is_finite()) {
                return Err(Error::NotNormalized {
                    v: i / self.width,
                    u: i % self.width,
                    sum,
                });
            }
        }
        Ok(())
    }
}

/// Row-per-sample feature matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!(
                "feature matrix needs at least one row and column, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot fill {rows}x{cols}",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidValue("non-finite feature".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self::new(n, n, data).expect("n >= 1")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Weights of the combined multi-task objective. Every weight defaults to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_p: f64,
    pub lambda_b: f64,
    pub lambda_seg: f64,
    pub lambda_m: f64,
    pub lambda_c: f64,
    pub lambda_d: f64,
    pub lambda_b_gan: f64,
    pub lambda_b_bce: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_p: 1.0,
            lambda_b: 1.0,
            lambda_seg: 1.0,
            lambda_m: 1.0,
            lambda_c: 1.0,
            lambda_d: 1.0,
            lambda_b_gan: 1.0,
            lambda_b_bce: 1.0,
        }
    }
}

impl LossWeights {
    pub fn zero() -> Self {
        Self::uniform(0.0)
    }

    pub fn uniform(w: f64) -> Self {
        Self {
            lambda_p: w,
            lambda_b: w,
            lambda_seg: w,
            lambda_m: w,
            lambda_c: w,
            lambda_d: w,
            lambda_b_gan: w,
            lambda_b_bce: w,
        }
    }

    pub fn named(&self) -> [(&'static str, f64); 8] {
        [
            ("lambda_p", self.lambda_p),
            ("lambda_b", self.lambda_b),
            ("lambda_seg", self.lambda_seg),
            ("lambda_m", self.lambda_m),
            ("lambda_c", self.lambda_c),
            ("lambda_d", self.lambda_d),
            ("lambda_b_gan", self.lambda_b_gan),
            ("lambda_b_bce", self.lambda_b_bce),
        ]
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            lambda_p: self.lambda_p * k,
            lambda_b: self.lambda_b * k,
            lambda_seg: self.lambda_seg * k,
            lambda_m: self.lambda_m * k,
            lambda_c: self.lambda_c * k,
            lambda_d: self.lambda_d * k,
            lambda_b_gan: self.lambda_b_gan * k,
            lambda_b_bce: self.lambda_b_bce * k,
        }
    }

    pub fn check(&self) -> Result<()> {
        for (name, w) in self.named() {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::schema(
                    format!("loss_weights.{name}"),
                    format!("weight must be finite and >= 0, got {w}"),
                ));
            }
        }
        Ok(())
    }
}

/// One broken stack invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub channel: &'static str,
    pub v: usize,
    pub u: usize,
    pub rule: String,
}

const RANGE_REL_TOL: f64 = 1e-5;
const NORMAL_UNIT_TOL: f64 = 1e-6;

/// Lists every pixel-level invariant breach of `stack`; empty when it is valid.
///
/// Channel shapes must agree (a shape mismatch is reported once at (0, 0)).
pub fn validate_stack(stack: &RangeImageStack) -> Vec<Violation> {
    let mut out = Vec::new();
    if let Err(e) = stack.check_dims() {
        out.push(Violation {
            channel: "shape",
            v: 0,
            u: 0,
            rule: e.to_string(),
        });
        return out;
    }
    let (h, w) = stack.dims();
    let mut push = |channel, v, u, rule: String| out.push(Violation { channel, v, u, rule });
    for v in 0..h {
        for u in 0..w {
            let m = stack.mask[(v, u)];
            let syn = stack.synthetic[(v, u)];
            let idx = stack.index[(v, u)];
            let r = stack.range[(v, u)];
            let refl = stack.reflectivity[(v, u)];
            let c = stack.coords[(v, u)];
            let n = stack.normals[(v, u)];

            if m > 1 {
                push("mask", v, u, format!("mask value {m} is not binary"));
            }
            if syn > 1 {
                push("synthetic", v, u, format!("synthetic value {syn} is not binary"));
            }
            if syn == 1 && m != 1 {
                push("synthetic", v, u, "synthetic pixel must be valid".into());
            }
            if idx < -1 {
                push("index", v, u, format!("index {idx} below -1"));
            }
            let valid = m == 1;
            let has_point = idx >= 0;
            if valid {
                if syn == 0 && !has_point {
                    push("index", v, u, "valid pixel without point index".into());
                }
                if syn == 1 && has_point {
                    push("index", v, u, "synthetic pixel must carry index -1".into());
                }
                if !(r > 0.0 && r.is_finite()) {
                    push("range", v, u, format!("valid pixel has range {r}"));
                } else {
                    let norm = norm3(c);
                    if (r - norm).abs() > RANGE_REL_TOL * r {
                        push(
                            "coords",
                            v,
                            u,
                            format!("range {r} differs from |coords| {norm}"),
                        );
                    }
                }
                if !(0.0..=1.0).contains(&refl) {
                    push("reflectivity", v, u, format!("reflectivity {refl} outside [0,1]"));
                }
            } else {
                if has_point {
                    push("index", v, u, format!("invalid pixel carries index {idx}"));
                }
                if r != 0.0 {
                    push("range", v, u, format!("invalid pixel has range {r}"));
                }
                if n != [0.0; 3] {
                    push("normals", v, u, "invalid pixel has a normal".into());
                }
            }
            if n != [0.0; 3] {
                let len = norm3(n);
                if (len - 1.0).abs() > NORMAL_UNIT_TOL || !len.is_finite() {
                    push("normals", v, u, format!("normal length {len} is not 1"));
                }
            }
        }
    }
    out
}

#[inline]
pub(crate) fn norm3(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}
