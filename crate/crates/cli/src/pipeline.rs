use std::path::Path;

use lrt_core::boundary::boundaries_from_labels;
use lrt_core::io::{Config, PipelineParams};
use lrt_core::projection::{labels_to_image, project};
use lrt_core::restore::{repair_stack, RepairParams};
use lrt_core::surface::estimate_normals;
use lrt_core::{LabelImage, SensorModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::exit::{to_json, CliError, Code};
use crate::project::{config, list_files, load_point_labels, load_scan, stem};
use crate::tensors::{create_dir, f4, u1, vec3, write_npy, write_pgm, write_stack, write_text};
use crate::PipelineArgs;

#[derive(Serialize)]
struct Manifest<'a> {
    sensor: &'a SensorModel,
    pipeline: &'a PipelineParams,
    num_classes: usize,
    labels: bool,
    scans: Vec<ScanEntry>,
    failed: usize,
}

#[derive(Serialize, Default)]
struct ScanEntry {
    scan: String,
    points: usize,
    valid_pixels: usize,
    stripe_pixels: usize,
    inpaint_iterations: usize,
    /// First column of the crop, when cropping.
    crop_offset: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// FNV-1a, to derive a per-scan crop stream independent of processing order.
fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

pub fn crop_offset(width: usize, crop: usize, seed: Option<u64>, scan: &str) -> usize {
    let slack = width - crop;
    match seed {
        Some(s) => ChaCha8Rng::seed_from_u64(s ^ fnv1a(scan)).random_range(0..=slack),
        None => slack / 2,
    }
}

fn one(path: &Path, a: &PipelineArgs, cfg: &Config, params: &PipelineParams) -> Result<ScanEntry, CliError> {
    let name = stem(path);
    let io_err = |e: lrt_core::Error| CliError::new(Code::Io, e.to_string());
    let cloud = load_scan(path, cfg)?;
    let stack = project(&cloud, &cfg.sensor).map_err(|e| CliError::input(path, e))?;
    let labels: Option<LabelImage> = match &a.labels {
        Some(dir) => {
            let pl = load_point_labels(dir, &name, cloud.count(), cfg)?;
            Some(labels_to_image(&stack, &pl, cfg.remap.num_classes()).map_err(|e| CliError::input(path, e))?)
        }
        None => None,
    };
    let repair = RepairParams {
        kernel: params.kernel,
        inpaint: params.inpaint,
        fill_labels: params.fill_labels,
    };
    let fail = |e: lrt_core::Error| CliError::new(Code::Partial, format!("{name}: {e}"));
    let repaired = repair_stack(&stack, labels.as_ref(), &cfg.sensor, &repair).map_err(fail)?;
    let mut out = estimate_normals(&repaired.stack).map_err(fail)?;
    let mut labels = repaired.labels;
    let mut stripes = repaired.stripes.into_grid();
    let mut boundary = match &labels {
        Some(l) => Some(boundaries_from_labels(l, &out.mask).map_err(fail)?.into_grid()),
        None => None,
    };

    let mut entry = ScanEntry {
        scan: name.clone(),
        points: cloud.count(),
        valid_pixels: stack.valid_count(),
        stripe_pixels: stripes.iter().filter(|&&s| s == 1).count(),
        inpaint_iterations: repaired.range_iterations,
        ..ScanEntry::default()
    };
    if let Some(cw) = params.crop_width {
        let u0 = crop_offset(cfg.sensor.width, cw, params.seed, &name);
        out = out.crop_columns(u0, cw).map_err(fail)?;
        stripes = stripes.crop_columns(u0, cw).map_err(fail)?;
        labels = labels.map(|l| l.crop_columns(u0, cw)).transpose().map_err(fail)?;
        boundary = boundary.map(|b| b.crop_columns(u0, cw)).transpose().map_err(fail)?;
        entry.crop_offset = Some(u0);
    }

    let dir = a.out.join(&name);
    write_stack(&dir, &out, labels.as_ref()).map_err(io_err)?;
    write_npy(&dir, "normals", &vec3(&out.normals)).map_err(io_err)?;
    write_npy(&dir, "synthetic", &u1(&out.synthetic)).map_err(io_err)?;
    write_npy(&dir, "stripe_mask", &u1(&stripes)).map_err(io_err)?;
    if let Some(b) = &boundary {
        write_npy(&dir, "boundary", &f4(b)).map_err(io_err)?;
    }
    write_pgm(&dir, "range", &out.range).map_err(io_err)?;
    write_pgm(&dir, "reflectivity", &out.reflectivity).map_err(io_err)?;
    write_pgm(&dir, "stripe_mask", &stripes.map(|&s| s as f64)).map_err(io_err)?;
    log::info!("{name}: {} stripe pixels repaired", entry.stripe_pixels);
    Ok(entry)
}

pub fn run(a: &PipelineArgs) -> Result<(), CliError> {
    let cfg = config(&a.config)?;
    let mut params = cfg.pipeline.clone();
    if let Some(f) = a.fill_labels {
        params.fill_labels = f;
    }
    if a.crop_width.is_some() {
        params.crop_width = a.crop_width;
    }
    if a.seed.is_some() {
        params.seed = a.seed;
    }
    if let Some(cw) = params.crop_width {
        if cw == 0 || cw > cfg.sensor.width {
            return Err(CliError::new(
                Code::Config,
                format!("crop width {cw} outside 1..={}", cfg.sensor.width),
            ));
        }
    }
    let paths = list_files(&a.scan_dir, "bin")?;
    create_dir(&a.out).map_err(|e| CliError::new(Code::Io, e.to_string()))?;

    let results: Vec<Result<ScanEntry, CliError>> = paths.par_iter().map(|p| one(p, a, &cfg, &params)).collect();
    let mut scans = Vec::with_capacity(results.len());
    let mut failed = 0;
    for (p, r) in paths.iter().zip(results) {
        scans.push(r.unwrap_or_else(|e| {
            log::error!("{}: {}", p.display(), e.message);
            failed += 1;
            ScanEntry {
                scan: stem(p),
                error: Some(e.message),
                ..ScanEntry::default()
            }
        }));
    }
    let manifest = Manifest {
        sensor: &cfg.sensor,
        pipeline: &params,
        num_classes: cfg.remap.num_classes(),
        labels: a.labels.is_some(),
        scans,
        failed,
    };
    write_text(&a.out.join("manifest.json"), &to_json(&manifest)?)
        .map_err(|e| CliError::new(Code::Io, e.to_string()))?;
    if failed > 0 {
        return Err(CliError::new(
            Code::Partial,
            format!("{failed} of {} scans failed", paths.len()),
        ));
    }
    Ok(())
}
