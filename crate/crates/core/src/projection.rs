//! Spherical projection of a sweep onto a range image, and the way back.
//!
//! A point at range `r` with yaw `atan2(y, x)` and pitch `asin(z / r)` lands
//! in column `floor(0.5 * (1 - yaw / pi) * w) mod w` and row
//! `floor((fov_up - pitch) / fov_total * h)`, clamped to the image. Column
//! `w / 2` looks down +x; rows count downward from the upper field-of-view
//! edge. When several points share a pixel the nearest one is kept, ties
//! going to the smaller point index.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::par;
use crate::types::{LabelImage, Point, PointCloud, RangeImageStack, SensorModel};

/// Pixel `(v, u)` a point projects to, or `None` if it is closer than the
/// sensor's minimum range.
#[inline]
pub fn pixel_of(p: &Point, sensor: &SensorModel) -> Option<(usize, usize)> {
    let [x, y, z] = p.xyz();
    let r = (x * x + y * y + z * z).sqrt();
    if r < sensor.min_range || r <= 0.0 {
        return None;
    }
    let yaw = y.atan2(x);
    let pitch = (z / r).clamp(-1.0, 1.0).asin().to_degrees();

    let w = sensor.width as i64;
    let u = ((0.5 * (1.0 - yaw / PI) * sensor.width as f64).floor() as i64).rem_euclid(w);
    let v = ((sensor.fov_up - pitch) / sensor.fov_total * sensor.height as f64).floor();
    let v = v.clamp(0.0, (sensor.height - 1) as f64) as usize;
    Some((v, u as usize))
}

/// Unit direction through the center of pixel `(v, u)`; the inverse of [`pixel_of`].
pub fn pixel_ray(sensor: &SensorModel, v: usize, u: usize) -> [f64; 3] {
    let yaw = PI * (1.0 - 2.0 * (u as f64 + 0.5) / sensor.width as f64);
    let pitch =
        (sensor.fov_up - (v as f64 + 0.5) / sensor.height as f64 * sensor.fov_total).to_radians();
    [pitch.cos() * yaw.cos(), pitch.cos() * yaw.sin(), pitch.sin()]
}

/// Projects `cloud` into a stack; the normals channel is left at zero.
pub fn project(cloud: &PointCloud, sensor: &SensorModel) -> Result<RangeImageStack> {
    sensor.check()?;
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let (h, w) = (sensor.height, sensor.width);

    let hits: Vec<Option<(usize, f64)>> = par::map(cloud.points(), |p| {
        pixel_of(p, sensor).map(|(v, u)| (v * w + u, p.range()))
    });

    // Nearest-wins scatter. Iterating in point order with a strict `<` keeps
    // the smaller index on exact range ties.
    let mut winner: Vec<i64> = vec![-1; h * w];
    let mut best: Vec<f64> = vec![f64::INFINITY; h * w];
    for (i, hit) in hits.iter().enumerate() {
        if let Some((pix, r)) = *hit {
            if r < best[pix] {
                best[pix] = r;
                winner[pix] = i as i64;
            }
        }
    }

    let mut stack = RangeImageStack::empty(h, w);
    let points = cloud.points();
    for (pix, &i) in winner.iter().enumerate() {
        if i < 0 {
            continue;
        }
        let p = &points[i as usize];
        let (v, u) = (pix / w, pix % w);
        stack.range[(v, u)] = best[pix];
        stack.reflectivity[(v, u)] = p.reflectivity as f64;
        stack.coords[(v, u)] = p.xyz();
        stack.index[(v, u)] = i;
        stack.mask[(v, u)] = 1;
    }
    Ok(stack)
}

/// Label image holding each index-map winner's label; empty pixels get 0.
pub fn labels_to_image(
    stack: &RangeImageStack,
    point_labels: &[u32],
    num_classes: usize,
) -> Result<LabelImage> {
    let mut grid = Grid::filled(stack.height(), stack.width(), 0u32);
    for (dst, &i) in grid.as_mut_slice().iter_mut().zip(stack.index.iter()) {
        if i >= 0 {
            *dst = *point_labels.get(i as usize).ok_or_else(|| {
                Error::Shape(format!(
                    "index map references point {i}, only {} labels",
                    point_labels.len()
                ))
            })?;
        }
    }
    LabelImage::new(grid, num_classes)
}

/// Assigns every point the label of the pixel it projects to, so occluded
/// points inherit the label of the surface in front of them. Points below
/// the minimum range get the ignore label.
pub fn backproject_labels(
    labels: &LabelImage,
    stack: &RangeImageStack,
    cloud: &PointCloud,
    sensor: &SensorModel,
) -> Result<Vec<u32>> {
    let dims = (sensor.height, sensor.width);
    if labels.dims() != dims || stack.dims() != dims {
        return Err(Error::Shape(format!(
            "labels {:?}, stack {:?}, sensor {:?}",
            labels.dims(),
            stack.dims(),
            dims
        )));
    }
    if let Some(&i) = stack.index.iter().find(|&&i| i >= cloud.count() as i64) {
        return Err(Error::Shape(format!(
            "index map references point {i} of a {}-point cloud",
            cloud.count()
        )));
    }
    let grid = labels.labels();
    Ok(par::map(cloud.points(), |p| {
        pixel_of(p, sensor).map_or(0, |(v, u)| grid[(v, u)])
    }))
}
