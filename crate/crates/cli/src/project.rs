use std::path::{Path, PathBuf};

use lrt_core::io::{load_config, read_file, read_label_file, read_scan_bin_scaled, Config};
use lrt_core::projection::{labels_to_image, project};
use lrt_core::{LabelImage, PointCloud};
use rayon::prelude::*;

use crate::exit::{CliError, Code};
use crate::tensors::write_stack;
use crate::ProjectArgs;

pub fn config(path: &Path) -> Result<Config, CliError> {
    load_config(path).map_err(|e| CliError::config(path, e))
}

/// Files of `dir` with extension `ext`, sorted by name.
pub fn list_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::new(Code::Io, format!("{}: {e}", dir.display())))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| CliError::new(Code::Io, format!("{}: {e}", dir.display())))?
            .path();
        if path.is_file() && path.extension().is_some_and(|x| x == ext) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

pub fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned())
}

pub fn load_scan(path: &Path, cfg: &Config) -> Result<PointCloud, CliError> {
    let bytes = read_file(path).map_err(|e| CliError::input(path, e))?;
    read_scan_bin_scaled(&bytes, cfg.pipeline.remission_max).map_err(|e| CliError::input(path, e))
}

/// Per-point labels of the scan `stem` from `dir/<stem>.label`.
pub fn load_point_labels(dir: &Path, stem: &str, count: usize, cfg: &Config) -> Result<Vec<u32>, CliError> {
    let path = dir.join(format!("{stem}.label"));
    if !path.is_file() {
        return Err(CliError::new(
            Code::Pairing,
            format!("no label file {} for scan {stem}", path.display()),
        ));
    }
    let bytes = read_file(&path).map_err(|e| CliError::input(&path, e))?;
    read_label_file(&bytes, &cfg.remap, count).map_err(|e| CliError::input(&path, e))
}

pub fn scans(a: &crate::ScanInput) -> Result<Vec<PathBuf>, CliError> {
    match (&a.scan, &a.scan_dir) {
        (Some(f), _) => Ok(vec![f.clone()]),
        (None, Some(d)) => list_files(d, "bin"),
        (None, None) => unreachable!("clap requires one input"),
    }
}

fn one(path: &Path, a: &ProjectArgs, cfg: &Config) -> Result<(), CliError> {
    let name = stem(path);
    let cloud = load_scan(path, cfg)?;
    let stack = project(&cloud, &cfg.sensor).map_err(|e| CliError::input(path, e))?;
    let labels: Option<LabelImage> = match &a.labels {
        Some(dir) => {
            let pl = load_point_labels(dir, &name, cloud.count(), cfg)?;
            Some(
                labels_to_image(&stack, &pl, cfg.remap.num_classes())
                    .map_err(|e| CliError::input(path, e))?,
            )
        }
        None => None,
    };
    let dir = a.out.join(&name);
    write_stack(&dir, &stack, labels.as_ref()).map_err(|e| CliError::new(Code::Io, e.to_string()))?;
    log::info!("{name}: {} points, {} valid pixels", cloud.count(), stack.valid_count());
    Ok(())
}

pub fn run(a: &ProjectArgs) -> Result<(), CliError> {
    let cfg = config(&a.config)?;
    let paths = scans(&a.input)?;
    let results: Vec<Result<(), CliError>> = paths.par_iter().map(|p| one(p, a, &cfg)).collect();
    // first failure in scan order decides the exit code
    let mut first = None;
    for (p, r) in paths.iter().zip(results) {
        if let Err(e) = r {
            log::error!("{}: {}", p.display(), e.message);
            first.get_or_insert(e);
        }
    }
    first.map_or(Ok(()), Err)
}
