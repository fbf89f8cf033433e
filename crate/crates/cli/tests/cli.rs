use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lrt_core::io::{read_tensor, write_label_file, write_scan_bin, NpyData};
use lrt_core::metrics::{AbsentPolicy, ConfusionMatrix};
use lrt_core::{Point, PointCloud};
use serde_json::Value;

const H: usize = 64;
const W: usize = 1024;

fn lrt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrt"))
        .args(args)
        .env("LRT_JOBS", "2")
        .output()
        .expect("run lrt")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("config.json");
    let cfg = format!(
        r#"{{
  "sensor": {{"name": "test", "height": {H}, "width": {W}, "fov_up": 3.0, "fov_total": 28.0}},
  "labels": {{"num_classes": 4, "remap": {{"10": 1, "40": 2, "50": 3}},
             "class_names": ["unlabeled", "car", "road", "building"]}},
  "pipeline": {{"inpaint": {{"max_iters": 120}}}}
}}"#
    );
    fs::write(&path, cfg).unwrap();
    path
}

/// One return per pixel centre, every 4th beam missing; raw labels by azimuth.
fn scan(phase: f64) -> (Vec<u8>, Vec<u32>) {
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    for v in 0..H {
        if v % 4 == 1 {
            continue;
        }
        for u in 0..W {
            let yaw = PI - 2.0 * PI * (u as f64 + 0.5) / W as f64;
            let pitch = (3.0 - 28.0 * (v as f64 + 0.5) / H as f64).to_radians();
            let r = 10.0 + 3.0 * (yaw + phase).sin();
            pts.push(Point::new(
                (r * pitch.cos() * yaw.cos()) as f32,
                (r * pitch.cos() * yaw.sin()) as f32,
                (r * pitch.sin()) as f32,
                0.5,
            ));
            let raw = [10u32, 40, 50, 0][(u * 4 / W + v / 32) % 4];
            labels.push(raw | ((u as u32 % 7) << 16));
        }
    }
    (write_scan_bin(&PointCloud::new(pts).unwrap()), labels)
}

struct Fixture {
    dir: tempfile::TempDir,
    config: PathBuf,
    scans: PathBuf,
    labels: PathBuf,
}

fn fixture(n: usize) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let scans = dir.path().join("scans");
    let labels = dir.path().join("labels");
    fs::create_dir_all(&scans).unwrap();
    fs::create_dir_all(&labels).unwrap();
    for k in 0..n {
        let (bin, lab) = scan(k as f64);
        fs::write(scans.join(format!("{k:06}.bin")), bin).unwrap();
        fs::write(labels.join(format!("{k:06}.label")), write_label_file(&lab)).unwrap();
    }
    Fixture {
        dir,
        config,
        scans,
        labels,
    }
}

fn npy_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".npy"))
        .collect();
    v.sort();
    v
}

#[test]
fn project_writes_five_or_six_tensors_deterministically() {
    let f = fixture(1);
    let out = f.dir.path().join("out");
    let scan = f.scans.join("000000.bin");
    let o = lrt(&["project", "--scan", s(&scan), "--config", s(&f.config), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(npy_files(&out.join("000000")), ["coords.npy", "index.npy", "mask.npy", "range.npy", "reflectivity.npy"]);

    let out2 = f.dir.path().join("out2");
    let o = lrt(&[
        "project", "--scan-dir", s(&f.scans), "--config", s(&f.config), "--out", s(&out2), "--labels", s(&f.labels),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let files = npy_files(&out2.join("000000"));
    assert_eq!(files.len(), 6);
    for name in ["range.npy", "mask.npy", "coords.npy", "index.npy", "reflectivity.npy"] {
        assert_eq!(
            fs::read(out.join("000000").join(name)).unwrap(),
            fs::read(out2.join("000000").join(name)).unwrap(),
            "{name} differs between runs"
        );
    }
    let range = read_tensor(&out.join("000000/range.npy")).unwrap();
    assert_eq!(range.shape, vec![H, W]);
    let coords = read_tensor(&out.join("000000/coords.npy")).unwrap();
    assert_eq!(coords.shape, vec![H, W, 3]);
}

#[test]
fn project_error_codes() {
    let f = fixture(1);
    let out = f.dir.path().join("out");
    let missing_cfg = f.dir.path().join("nope.json");
    let o = lrt(&["project", "--scan-dir", s(&f.scans), "--config", s(&missing_cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.json"));

    let bad_cfg = f.dir.path().join("bad.json");
    fs::write(&bad_cfg, r#"{"sensor": {"height": 64, "width": 1024, "fov_up": 40.0, "fov_total": 28.0}}"#).unwrap();
    let o = lrt(&["project", "--scan-dir", s(&f.scans), "--config", s(&bad_cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("sensor.fov_up"));

    let missing_scan = f.dir.path().join("missing.bin");
    let o = lrt(&["project", "--scan", s(&missing_scan), "--config", s(&f.config), "--out", s(&out)]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.bin"));

    let truncated = f.dir.path().join("short.bin");
    fs::write(&truncated, [0u8; 20]).unwrap();
    let o = lrt(&["project", "--scan", s(&truncated), "--config", s(&f.config), "--out", s(&out)]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("short.bin"));

    let no_labels = f.dir.path().join("empty_labels");
    fs::create_dir_all(&no_labels).unwrap();
    let o = lrt(&[
        "project", "--scan-dir", s(&f.scans), "--config", s(&f.config), "--out", s(&out), "--labels", s(&no_labels),
    ]);
    assert_eq!(code(&o), 4);
}

fn labels_tensor(path: &Path) -> Vec<i32> {
    match read_tensor(path).unwrap().data {
        NpyData::I4(v) => v,
        other => panic!("labels dtype {other:?}"),
    }
}

fn u8_tensor(path: &Path) -> Vec<u8> {
    match read_tensor(path).unwrap().data {
        NpyData::U1(v) => v,
        other => panic!("dtype {other:?}"),
    }
}

#[test]
fn pipeline_repairs_stripes_and_writes_manifest() {
    let f = fixture(2);
    let out = f.dir.path().join("out");
    let o = lrt(&[
        "pipeline", "--scan-dir", s(&f.scans), "--config", s(&f.config), "--out", s(&out), "--labels", s(&f.labels),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["failed"], 0);
    assert_eq!(manifest["pipeline"]["kernel"], serde_json::json!([3, 3]));
    assert_eq!(manifest["pipeline"]["inpaint"]["max_iters"], 120);
    let scans = manifest["scans"].as_array().unwrap();
    assert_eq!(scans.len(), 2);
    for sc in scans {
        assert_eq!(sc["stripe_pixels"], (H / 4 * W) as u64);
    }
    let d = out.join("000000");
    for name in ["boundary.npy", "normals.npy", "stripe_mask.npy", "labels.npy", "synthetic.npy"] {
        assert!(d.join(name).is_file(), "{name}");
    }
    for name in ["range.pgm", "reflectivity.pgm", "stripe_mask.pgm"] {
        assert!(d.join(name).is_file(), "{name}");
    }
    let mask = u8_tensor(&d.join("mask.npy"));
    assert!(mask.iter().all(|&m| m == 1), "stripes left invalid pixels");
    let labels = labels_tensor(&d.join("labels.npy"));
    let stripes = u8_tensor(&d.join("stripe_mask.npy"));
    // dropped rows sit between two valid rows; the tie goes to the row above
    for (i, &st) in stripes.iter().enumerate() {
        if st == 1 {
            assert_eq!(labels[i], labels[i - W], "pixel {i}");
        }
    }
    assert!(labels.iter().any(|&l| l != 0));
}

#[test]
fn pipeline_crop_and_fill_flags() {
    let f = fixture(1);
    let out = f.dir.path().join("out");
    let o = lrt(&[
        "pipeline", "--scan-dir", s(&f.scans), "--config", s(&f.config), "--out", s(&out), "--labels", s(&f.labels),
        "--crop-width", "512", "--fill-labels", "false",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let d = out.join("000000");
    for name in ["range.npy", "labels.npy", "boundary.npy", "stripe_mask.npy"] {
        assert_eq!(read_tensor(&d.join(name)).unwrap().shape, vec![H, 512], "{name}");
    }
    assert_eq!(read_tensor(&d.join("normals.npy")).unwrap().shape, vec![H, 512, 3]);
    let labels = labels_tensor(&d.join("labels.npy"));
    let stripes = u8_tensor(&d.join("stripe_mask.npy"));
    let holes = stripes.iter().zip(&labels).filter(|(&s, &l)| s == 1 && l == 0).count();
    assert_eq!(holes, stripes.iter().filter(|&&s| s == 1).count(), "labels filled despite --fill-labels false");
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["scans"][0]["crop_offset"], 256);
    assert_eq!(manifest["pipeline"]["fill_labels"], false);

    // seeded crops are reproducible
    let a = f.dir.path().join("a");
    let b = f.dir.path().join("b");
    for dir in [&a, &b] {
        let o = lrt(&[
            "pipeline", "--scan-dir", s(&f.scans), "--config", s(&f.config), "--out", s(dir), "--crop-width", "300",
            "--seed", "17",
        ]);
        assert_eq!(code(&o), 0);
    }
    assert_eq!(fs::read(a.join("manifest.json")).unwrap(), fs::read(b.join("manifest.json")).unwrap());
    assert_eq!(fs::read(a.join("000000/range.npy")).unwrap(), fs::read(b.join("000000/range.npy")).unwrap());

    let o = lrt(&[
        "pipeline", "--scan-dir", s(&f.scans), "--config", s(&f.config), "--out", s(&a), "--crop-width", "5000",
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn pipeline_partial_failure_exits_one() {
    let f = fixture(1);
    fs::write(f.scans.join("broken.bin"), [1u8; 7]).unwrap();
    let out = f.dir.path().join("out");
    let o = lrt(&["pipeline", "--scan-dir", s(&f.scans), "--config", s(&f.config), "--out", s(&out)]);
    assert_eq!(code(&o), 1);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["failed"], 1);
    assert!(out.join("000000/range.npy").is_file());
}

fn write_labels(dir: &Path, name: &str, raw: &[u32]) {
    fs::create_dir_all(dir).unwrap();
    fs::write(dir.join(format!("{name}.label")), write_label_file(raw)).unwrap();
}

#[test]
fn eval_reports_and_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let (gt, pred) = (dir.path().join("gt"), dir.path().join("pred"));
    let raw = [0u32, 10, 40, 50];
    let mut all_g = Vec::new();
    let mut all_p = Vec::new();
    for k in 0..3u32 {
        let g: Vec<u32> = (0..300u32).map(|i| raw[((i * 7 + k) % 4) as usize]).collect();
        let p: Vec<u32> = (0..300u32).map(|i| raw[((i * 5 + k * 3) % 4) as usize] | (k << 16)).collect();
        write_labels(&gt, &format!("{k:06}"), &g);
        write_labels(&pred, &format!("{k:06}"), &p);
        all_g.extend(g);
        all_p.extend(p);
    }
    let o = lrt(&["eval", "--pred", s(&pred), "--gt", s(&gt), "--config", s(&config)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(String::from_utf8_lossy(&o.stderr).contains("mIoU"));

    let class = |r: u32| match r & 0xffff {
        10 => 1,
        40 => 2,
        50 => 3,
        _ => 0,
    };
    let mut m = ConfusionMatrix::new(4).unwrap();
    let gm: Vec<u32> = all_g.iter().map(|&r| class(r)).collect();
    let pm: Vec<u32> = all_p.iter().map(|&r| class(r)).collect();
    m.accumulate(&gm, &pm).unwrap();
    let want = m.iou_report(AbsentPolicy::Exclude).unwrap();
    assert_eq!(report["miou"].as_f64().unwrap(), want.miou);
    assert_eq!(report["pairs"], 3);
    for (c, w) in report["per_class_iou"].as_array().unwrap().iter().zip(&want.per_class) {
        assert_eq!(c["iou"].as_f64(), w.iou);
    }
    assert_eq!(report["counts"][1][1].as_u64().unwrap(), m.get(1, 1));
    assert_eq!(report["per_class_iou"][0]["name"], "car");

    let o = lrt(&["eval", "--pred", s(&gt), "--gt", s(&gt), "--config", s(&config)]);
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["miou"].as_f64().unwrap(), 1.0);

    write_labels(&pred, "000099", &[10, 10]);
    let o = lrt(&["eval", "--pred", s(&pred), "--gt", s(&gt), "--config", s(&config)]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("000099"));
}

#[test]
fn eval_zero_absent_policy() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let (gt, pred) = (dir.path().join("gt"), dir.path().join("pred"));
    write_labels(&gt, "a", &[10, 10, 40]);
    write_labels(&pred, "a", &[10, 10, 40]);
    let o = lrt(&["eval", "--pred", s(&pred), "--gt", s(&gt), "--config", s(&config)]);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["miou"].as_f64().unwrap(), 1.0);
    let o = lrt(&["eval", "--pred", s(&pred), "--gt", s(&gt), "--config", s(&config), "--zero-absent"]);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((r["miou"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn loss_selftest_is_complete_and_deterministic() {
    let a = lrt(&["loss-selftest", "--seed", "3"]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let b = lrt(&["loss-selftest", "--seed", "3"]);
    assert_eq!(a.stdout, b.stdout);
    let r: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(r["passed"], true);
    let kernels = r["kernels"].as_array().unwrap();
    assert_eq!(kernels.len(), 15);
    for k in kernels {
        assert!(k["max_rel_err"].as_f64().unwrap() < 1e-4, "{k}");
    }
    let default = lrt(&["loss-selftest"]);
    assert_eq!(code(&default), 0);
}
