mod common;

use lrt_core::projection::{backproject_labels, labels_to_image, pixel_of, project};
use lrt_core::surface::estimate_normals;
use lrt_core::{validate_stack, Grid, LabelImage, Point, PointCloud, RangeImageStack, SensorModel};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use common::*;

fn small_sensor() -> SensorModel {
    SensorModel::new("t", 16, 128, 10.0, 30.0).unwrap()
}

/// Projected and normal-estimated stack of a random scan.
fn valid_stack(seed: u64) -> RangeImageStack {
    let s = small_sensor();
    let mut rng = rng(seed);
    let n = rng.random_range(50..800);
    let cloud = random_cloud(&mut rng, &s, n);
    estimate_normals(&project(&cloud, &s).unwrap()).unwrap()
}

#[test]
fn projected_hundred_point_scan_is_valid() {
    let s = small_sensor();
    let cloud = random_cloud(&mut rng(1), &s, 100);
    assert!(validate_stack(&project(&cloud, &s).unwrap()).is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_yields_valid_stack(seed in any::<u64>()) {
        let st = valid_stack(seed);
        let v = validate_stack(&st);
        prop_assert!(v.is_empty(), "{:?}", &v[..v.len().min(3)]);
    }

    #[test]
    fn single_field_mutation_is_detected(seed in any::<u64>(), which in 0usize..8, pick in any::<prop::sample::Index>()) {
        let mut st = valid_stack(seed);
        let valid: Vec<(usize, usize)> = (0..st.height())
            .flat_map(|v| (0..st.width()).map(move |u| (v, u)))
            .filter(|&p| st.mask[p] == 1)
            .collect();
        prop_assume!(!valid.is_empty());
        let p = valid[pick.index(valid.len())];
        match which {
            0 => st.mask[p] = 0,
            1 => st.index[p] = -1,
            2 => st.range[p] = 0.0,
            3 => st.range[p] *= 1.01,
            4 => st.coords[p][2] += 0.5,
            5 => st.reflectivity[p] = 1.5,
            6 => st.normals[p] = [0.5, 0.5, 0.0],
            _ => st.mask[p] = 2,
        }
        prop_assert!(!validate_stack(&st).is_empty(), "mutation {} at {:?} undetected", which, p);
    }

    #[test]
    fn pixels_in_bounds(x in -100f32..100.0, y in -100f32..100.0, z in -100f32..100.0) {
        let s = small_sensor();
        if let Some((v, u)) = pixel_of(&Point::new(x, y, z, 0.0), &s) {
            prop_assert!(v < s.height && u < s.width);
        }
    }

    #[test]
    fn order_invariant_with_distinct_ranges(seed in any::<u64>()) {
        let s = small_sensor();
        let mut rng = rng(seed);
        let n = rng.random_range(1..600);
        // drop exact duplicates of range so no collision can tie
        let mut pts: Vec<Point> = random_cloud(&mut rng, &s, n).points().to_vec();
        pts.sort_by(|a, b| a.range().total_cmp(&b.range()));
        pts.dedup_by(|a, b| a.range() == b.range());
        let a = project(&PointCloud::new(pts.clone()).unwrap(), &s).unwrap();
        let mut perm: Vec<usize> = (0..pts.len()).collect();
        perm.shuffle(&mut rng);
        let shuffled: Vec<Point> = perm.iter().map(|&i| pts[i]).collect();
        let b = project(&PointCloud::new(shuffled).unwrap(), &s).unwrap();
        prop_assert_eq!(&a.range, &b.range);
        prop_assert_eq!(&a.coords, &b.coords);
        prop_assert_eq!(&a.mask, &b.mask);
        for (ia, ib) in a.index.iter().zip(b.index.iter()) {
            if *ia >= 0 {
                prop_assert_eq!(perm[*ib as usize], *ia as usize);
            }
        }
    }

    #[test]
    fn normals_unit_bounded_and_facing_sensor(seed in any::<u64>()) {
        let st = valid_stack(seed);
        for (n, c) in st.normals.iter().zip(st.coords.iter()) {
            if *n == [0.0; 3] {
                continue;
            }
            let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            prop_assert!((len - 1.0).abs() < 1e-6);
            prop_assert!(n.iter().all(|x| (-1.0..=1.0).contains(x)));
            prop_assert!(n[0] * c[0] + n[1] * c[1] + n[2] * c[2] <= 0.0);
        }
    }

    #[test]
    fn backprojection_returns_winner_labels(seed in any::<u64>()) {
        let s = small_sensor();
        let mut rng = rng(seed);
        let n = rng.random_range(1..400);
        let cloud = random_cloud(&mut rng, &s, n);
        let st = project(&cloud, &s).unwrap();
        let point_labels: Vec<u32> = (0..cloud.count()).map(|_| rng.random_range(0..5)).collect();
        let img = labels_to_image(&st, &point_labels, 5).unwrap();
        let back = backproject_labels(&img, &st, &cloud, &s).unwrap();
        for (i, p) in cloud.points().iter().enumerate() {
            let (v, u) = pixel_of(p, &s).unwrap();
            // every point takes the label of its pixel's winner
            let winner = st.index[(v, u)];
            prop_assert!(winner >= 0);
            prop_assert_eq!(back[i], point_labels[winner as usize]);
            if winner as usize == i {
                prop_assert_eq!(back[i], point_labels[i]);
            }
        }
    }
}

#[test]
fn backprojection_of_points_below_min_range_is_ignore() {
    let s = small_sensor();
    let cloud = PointCloud::new(vec![Point::new(5.0, 0.0, 0.0, 0.1), Point::new(1e-4, 0.0, 0.0, 0.1)]).unwrap();
    let st = project(&cloud, &s).unwrap();
    let img = LabelImage::new(Grid::filled(s.height, s.width, 3u32), 4).unwrap();
    assert_eq!(backproject_labels(&img, &st, &cloud, &s).unwrap(), vec![3, 0]);
}
